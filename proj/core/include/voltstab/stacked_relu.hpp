#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voltstab/grid.hpp"
#include "voltstab/policy.hpp"

namespace voltstab {

double softplus(double x);
double sigmoid(double x);

/// Shape and scaling of the monotone reparameterization.
struct ConstraintConfig {
  std::size_t width = 16;    ///< units per side, including the inert first unit
  double eps = 1e-3;         ///< strictness floor on |slope| outside the band
  double slope_scale = 1.0;  ///< prefix slope = eps + slope_scale * softplus(a)
  double gap_scale = 0.01;   ///< kink spacing = gap_scale * softplus(c), p.u.

  void validate() const;
  /// Raw parameters per bus: 2 (width - 1) slopes plus 2 (width - 2) gaps.
  std::size_t raw_per_bus() const;
};

/// One bus of the stacked-ReLU controller
///   g(v) = -(xi+(v) + xi-(v)),
///   xi+(v) = sum_l w+_l ReLU(v + b+_l),  xi-(v) = sum_l w-_l ReLU(-v + b-_l).
/// Unit 0 of each side is inert (w = b = 0). The first active kink sits on the
/// band edge: b+_1 = -upper, b-_1 = lower.
struct StackedReluParams {
  Eigen::VectorXd w_plus;
  Eigen::VectorXd b_plus;
  Eigen::VectorXd w_minus;
  Eigen::VectorXd b_minus;
  double lower = kDefaultVLower;
  double upper = kDefaultVUpper;

  std::size_t width() const { return static_cast<std::size_t>(w_plus.size()); }
};

/// Unconstrained parameters for every bus in one flat vector, laid out per
/// bus as [a+ (w-1) | c+ (w-2) | a- (w-1) | c- (w-2)].
struct RawPolicyParams {
  std::size_t buses = 0;
  std::size_t width = 0;
  Eigen::VectorXd theta;

  RawPolicyParams() = default;
  RawPolicyParams(std::size_t buses, std::size_t width);

  static std::size_t per_bus(std::size_t width);
  std::size_t offset(std::size_t bus) const { return bus * per_bus(width); }

  auto slopes_plus(std::size_t bus) { return theta.segment(idx(bus, 0), seg(true)); }
  auto gaps_plus(std::size_t bus) { return theta.segment(idx(bus, 1), seg(false)); }
  auto slopes_minus(std::size_t bus) { return theta.segment(idx(bus, 2), seg(true)); }
  auto gaps_minus(std::size_t bus) { return theta.segment(idx(bus, 3), seg(false)); }
  auto slopes_plus(std::size_t bus) const { return theta.segment(idx(bus, 0), seg(true)); }
  auto gaps_plus(std::size_t bus) const { return theta.segment(idx(bus, 1), seg(false)); }
  auto slopes_minus(std::size_t bus) const { return theta.segment(idx(bus, 2), seg(true)); }
  auto gaps_minus(std::size_t bus) const { return theta.segment(idx(bus, 3), seg(false)); }

 private:
  Eigen::Index seg(bool slopes) const { return static_cast<Eigen::Index>(slopes ? width - 1 : width - 2); }
  Eigen::Index idx(std::size_t bus, int block) const;
};

/// Feasible parameters for every raw input: prefix sums of w+ are
/// eps + slope_scale * softplus(a+) >= eps, prefix sums of w- mirror that
/// below -eps, and kinks step outward from the band edges by
/// gap_scale * softplus(c). Throws ValidationError for non-finite raw values.
std::vector<StackedReluParams> constrain(const RawPolicyParams& raw, const VoltageBand& band,
                                         const ConstraintConfig& cfg = {});
StackedReluParams constrain_bus(const RawPolicyParams& raw, std::size_t bus, double lower, double upper,
                                const ConstraintConfig& cfg = {});

double policy_eval(const StackedReluParams& p, double v);
/// Right-hand derivative du/dv.
double policy_input_grad(const StackedReluParams& p, double v);

/// Adds scale * du_bus/dtheta at voltage v into `grad` (length theta.size()).
/// `p` must be constrain_bus(raw, bus, ...) under the same config.
void accumulate_param_grad(const RawPolicyParams& raw, const StackedReluParams& p, std::size_t bus, double v,
                           const ConstraintConfig& cfg, double scale, Eigen::Ref<Eigen::VectorXd> grad);
/// du_bus/dtheta as a full-length vector.
Eigen::VectorXd policy_param_grad(const RawPolicyParams& raw, const VoltageBand& band, std::size_t bus, double v,
                                  const ConstraintConfig& cfg = {});

/// Every structural constraint that `p` breaks; empty when feasible.
std::vector<std::string> check_invariants(const StackedReluParams& p, double eps);

/// All-zero raw parameters: uniform slope eps + ln 2, kinks 0.01 ln 2 apart.
RawPolicyParams zero_raw(std::size_t buses, std::size_t width);
/// Slopes raw ~ U[slope_lo, slope_hi], gaps raw ~ N(0, gap_std^2).
RawPolicyParams random_raw(std::size_t buses, std::size_t width, std::mt19937_64& rng, double slope_lo = -6.0,
                           double slope_hi = 6.0, double gap_std = 2.0);
/// Raw value whose mapped prefix slope equals `slope` (> eps).
double raw_for_slope(double slope, const ConstraintConfig& cfg = {});

class StackedReluPolicy final : public Policy {
 public:
  explicit StackedReluPolicy(std::vector<StackedReluParams> buses);

  std::size_t size() const override { return buses_.size(); }
  double act(std::size_t bus, double v) const override { return policy_eval(buses_.at(bus), v); }
  double slope(std::size_t bus, double v) const override { return policy_input_grad(buses_.at(bus), v); }
  double lipschitz_bound() const override { return lipschitz_; }
  std::string kind() const override { return "stacked_relu"; }

  const std::vector<StackedReluParams>& params() const { return buses_; }

 private:
  std::vector<StackedReluParams> buses_;
  double lipschitz_ = 0.0;
};

}  // namespace voltstab
