#include "voltstab/mlp.hpp"

#include <cmath>

#include "voltstab/error.hpp"
#include "voltstab/linalg.hpp"

namespace voltstab {

Eigen::VectorXd NetGradients::flat() const {
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < dW.size(); ++l) total += dW[l].size() + db[l].size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < dW.size(); ++l) {
    out.segment(at, dW[l].size()) = dW[l].reshaped();
    at += dW[l].size();
    out.segment(at, db[l].size()) = db[l];
    at += db[l].size();
  }
  return out;
}

FeedForwardNet::FeedForwardNet(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ValidationError("layer sizes", "need at least input and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ValidationError("layer sizes", "every layer needs at least one unit");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    W_.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1]), static_cast<Eigen::Index>(sizes_[l])));
    b_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
  }
}

FeedForwardNet FeedForwardNet::random(std::vector<std::size_t> sizes, std::mt19937_64& rng) {
  FeedForwardNet net(std::move(sizes));
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : net.W_[l].reshaped()) w = dist(rng);
    for (auto& b : net.b_[l]) b = dist(rng);
  }
  return net;
}

std::size_t FeedForwardNet::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) total += static_cast<std::size_t>(W_[l].size() + b_[l].size());
  return total;
}

Eigen::VectorXd FeedForwardNet::parameters() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    out.segment(at, W_[l].size()) = W_[l].reshaped();
    at += W_[l].size();
    out.segment(at, b_[l].size()) = b_[l];
    at += b_[l].size();
  }
  return out;
}

void FeedForwardNet::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw DimensionError("parameter vector has length " + std::to_string(flat.size()) + ", expected " +
                         std::to_string(parameter_count()));
  }
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    W_[l].reshaped() = flat.segment(at, W_[l].size());
    at += W_[l].size();
    b_[l] = flat.segment(at, b_[l].size());
    at += b_[l].size();
  }
}

Eigen::MatrixXd FeedForwardNet::forward(const Eigen::MatrixXd& x) const {
  Tape unused;
  return forward(x, unused);
}

Eigen::MatrixXd FeedForwardNet::forward(const Eigen::MatrixXd& x, Tape& tape) const {
  if (W_.empty()) throw ValidationError("network", "has no layers");
  if (static_cast<std::size_t>(x.rows()) != input_size()) {
    throw DimensionError("network expects input size " + std::to_string(input_size()) + ", got " +
                         std::to_string(x.rows()));
  }
  tape.inputs.resize(W_.size());
  tape.pre.resize(W_.size());
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    tape.inputs[l] = a;
    tape.pre[l] = (W_[l] * a).colwise() + b_[l];
    a = l + 1 < W_.size() ? Eigen::MatrixXd(tape.pre[l].cwiseMax(0.0)) : tape.pre[l];
  }
  return a;
}

NetGradients FeedForwardNet::backward(const Tape& tape, const Eigen::MatrixXd& upstream) const {
  if (tape.pre.size() != W_.size()) throw ValidationError("tape", "does not belong to this network");
  if (upstream.rows() != static_cast<Eigen::Index>(output_size()) || upstream.cols() != tape.pre.back().cols()) {
    throw DimensionError("upstream gradient shape does not match the network output");
  }
  NetGradients g;
  g.dW.resize(W_.size());
  g.db.resize(W_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = W_.size(); l-- > 0;) {
    if (l + 1 < W_.size()) delta = delta.cwiseProduct((tape.pre[l].array() > 0.0).cast<double>().matrix());
    g.dW[l] = delta * tape.inputs[l].transpose();
    g.db[l] = delta.rowwise().sum();
    delta = W_[l].transpose() * delta;
  }
  g.d_input = std::move(delta);
  return g;
}

Eigen::VectorXd net_eval(const FeedForwardNet& net, const Eigen::VectorXd& input) {
  return net.forward(input);
}

NetGradients net_backprop(const FeedForwardNet& net, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) {
  FeedForwardNet::Tape tape;
  net.forward(input, tape);
  return net.backward(tape, upstream);
}

void soft_update(FeedForwardNet& target, const FeedForwardNet& source, double tau) {
  if (!target.same_shape(source)) throw DimensionError("soft_update: network shapes differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau", "must lie in [0, 1]");
  for (std::size_t l = 0; l < target.layers(); ++l) {
    target.weight(l) = (1.0 - tau) * target.weight(l) + tau * source.weight(l);
    target.bias(l) = (1.0 - tau) * target.bias(l) + tau * source.bias(l);
  }
}

void soft_update(Eigen::VectorXd& target, const Eigen::VectorXd& source, double tau) {
  if (target.size() != source.size()) throw DimensionError("soft_update: vector lengths differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau", "must lie in [0, 1]");
  target = (1.0 - tau) * target + tau * source;
}

Sgd::Sgd(double lr) : lr_(lr) {
  if (!(lr > 0.0)) throw ValidationError("learning rate", "must be positive");
}

void Sgd::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, bool ascend) {
  if (params.size() != grad.size()) throw DimensionError("optimizer: gradient length mismatch");
  params += (ascend ? lr_ : -lr_) * grad;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))) {
  if (!(lr > 0.0)) throw ValidationError("learning rate", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam", "betas must lie in [0, 1)");
  }
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad, bool ascend) {
  if (params.size() != grad.size() || grad.size() != m_.size()) {
    throw DimensionError("optimizer: gradient length mismatch");
  }
  p1_ *= beta1_;
  p2_ *= beta2_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double a = lr_ * std::sqrt(1.0 - p2_) / (1.0 - p1_);
  const Eigen::VectorXd delta = a * m_.array() / (v_.array().sqrt() + eps_);
  if (ascend) {
    params += delta;
  } else {
    params -= delta;
  }
}

MlpPolicy::MlpPolicy(std::vector<FeedForwardNet> nets, InputScaling scaling)
    : nets_(std::move(nets)), scaling_(scaling) {
  if (!(scaling_.scale > 0.0)) throw ValidationError("input scale", "must be positive");
  for (const FeedForwardNet& net : nets_) {
    if (net.input_size() != 1 || net.output_size() != 1) {
      throw DimensionError("per-bus actor networks must map 1 input to 1 output");
    }
    double bound = 1.0 / scaling_.scale;
    for (std::size_t l = 0; l < net.layers(); ++l) {
      const Eigen::MatrixXd gram = net.weight(l).transpose() * net.weight(l);
      bound *= std::sqrt(linalg::symmetric_norm(gram));
    }
    lipschitz_ = std::max(lipschitz_, bound);
  }
}

double MlpPolicy::act(std::size_t bus, double v) const {
  Eigen::MatrixXd x(1, 1);
  x(0, 0) = (v - scaling_.center) / scaling_.scale;
  return nets_.at(bus).forward(x)(0, 0);
}

double MlpPolicy::slope(std::size_t bus, double v) const {
  Eigen::MatrixXd x(1, 1);
  x(0, 0) = (v - scaling_.center) / scaling_.scale;
  FeedForwardNet::Tape tape;
  const FeedForwardNet& net = nets_.at(bus);
  net.forward(x, tape);
  return net.backward(tape, Eigen::MatrixXd::Ones(1, 1)).d_input(0, 0) / scaling_.scale;
}

}  // namespace voltstab
