#pragma once

#include <string>

#include <Eigen/Core>

#include "voltstab/grid.hpp"

namespace voltstab {

/// Decentralized voltage controller: u_i = g_i(v_i) depends only on the
/// local voltage. Implementations are immutable and safe to share across
/// threads.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::size_t size() const = 0;
  virtual double act(std::size_t bus, double v) const = 0;
  /// Right-hand derivative du_i/dv_i at v.
  virtual double slope(std::size_t bus, double v) const = 0;
  /// Upper bound on |du_i/dv_i| over all buses and voltages.
  virtual double lipschitz_bound() const = 0;
  virtual std::string kind() const = 0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const;
  /// Diagonal of the policy Jacobian.
  Eigen::VectorXd slopes(const Eigen::VectorXd& v) const;
};

class ZeroPolicy final : public Policy {
 public:
  explicit ZeroPolicy(std::size_t n) : n_(n) {}
  std::size_t size() const override { return n_; }
  double act(std::size_t, double) const override { return 0.0; }
  double slope(std::size_t, double) const override { return 0.0; }
  double lipschitz_bound() const override { return 0.0; }
  std::string kind() const override { return "zero"; }

 private:
  std::size_t n_;
};

/// d(v) = -[v - upper]^+ + [lower - v]^+
double linear_deadband(double v, double lower, double upper);

class LinearDeadbandPolicy final : public Policy {
 public:
  explicit LinearDeadbandPolicy(VoltageBand band) : band_(std::move(band)) {}
  std::size_t size() const override { return band_.size(); }
  double act(std::size_t bus, double v) const override;
  double slope(std::size_t bus, double v) const override;
  double lipschitz_bound() const override { return 1.0; }
  std::string kind() const override { return "linear"; }

 private:
  VoltageBand band_;
};

}  // namespace voltstab
