#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/policy.hpp"

namespace voltstab {

struct NetGradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  Eigen::MatrixXd d_input;  ///< one column per sample

  Eigen::VectorXd flat() const;
};

/// Fully connected ReLU network with a linear output layer. Inputs and
/// outputs are column-per-sample matrices.
class FeedForwardNet {
 public:
  /// Intermediate values kept by forward() for backward().
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  ///< input of each layer
    std::vector<Eigen::MatrixXd> pre;     ///< pre-activation of each layer
  };

  FeedForwardNet() = default;
  /// Zero weights and biases. Needs at least an input and an output size.
  explicit FeedForwardNet(std::vector<std::size_t> sizes);
  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static FeedForwardNet random(std::vector<std::size_t> sizes, std::mt19937_64& rng);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layers() const { return W_.size(); }

  Eigen::MatrixXd& weight(std::size_t l) { return W_.at(l); }
  const Eigen::MatrixXd& weight(std::size_t l) const { return W_.at(l); }
  Eigen::VectorXd& bias(std::size_t l) { return b_.at(l); }
  const Eigen::VectorXd& bias(std::size_t l) const { return b_.at(l); }

  std::size_t parameter_count() const;
  /// Layer by layer: W (column-major) then b.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;
  /// Reverse pass for d(loss)/d(output) = upstream. ReLU'(0) is taken as 0.
  NetGradients backward(const Tape& tape, const Eigen::MatrixXd& upstream) const;

  bool same_shape(const FeedForwardNet& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

Eigen::VectorXd net_eval(const FeedForwardNet& net, const Eigen::VectorXd& input);
NetGradients net_backprop(const FeedForwardNet& net, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream);

/// target <- (1 - tau) target + tau source, elementwise.
void soft_update(FeedForwardNet& target, const FeedForwardNet& source, double tau);
void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau);

/// First-order update rule over a flat parameter vector; `ascend` flips the
/// sign for maximization.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, bool ascend = false) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, bool ascend = false) override;

 private:
  double lr_;
};

class Adam final : public Optimizer {
 public:
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, bool ascend = false) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  double p1_ = 1.0, p2_ = 1.0;
  Eigen::VectorXd m_, v_;
};

/// Maps v to a network input and back: x = (v - center) / scale.
struct InputScaling {
  double center = 1.0;
  double scale = 0.05;
};

/// Unconstrained decentralized actor: one 1-input network per bus.
class MlpPolicy final : public Policy {
 public:
  MlpPolicy(std::vector<FeedForwardNet> nets, InputScaling scaling);

  std::size_t size() const override { return nets_.size(); }
  double act(std::size_t bus, double v) const override;
  double slope(std::size_t bus, double v) const override;
  /// Product of layer spectral norms over the input scale.
  double lipschitz_bound() const override { return lipschitz_; }
  std::string kind() const override { return "mlp"; }

  const std::vector<FeedForwardNet>& nets() const { return nets_; }
  const InputScaling& scaling() const { return scaling_; }

 private:
  std::vector<FeedForwardNet> nets_;
  InputScaling scaling_;
  double lipschitz_ = 0.0;
};

}  // namespace voltstab
