#include "voltstab/stacked_relu.hpp"

#include <algorithm>
#include <cmath>

#include "voltstab/error.hpp"

namespace voltstab {

double softplus(double x) {
  // log1p(exp(x)) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void ConstraintConfig::validate() const {
  if (width < 2) throw ValidationError("width", "needs at least 2 units per side");
  if (!(eps > 0.0)) throw ValidationError("eps", "must be positive");
  if (!(slope_scale > 0.0)) throw ValidationError("slope_scale", "must be positive");
  if (!(gap_scale > 0.0)) throw ValidationError("gap_scale", "must be positive");
}

std::size_t ConstraintConfig::raw_per_bus() const { return RawPolicyParams::per_bus(width); }

RawPolicyParams::RawPolicyParams(std::size_t buses_, std::size_t width_)
    : buses(buses_), width(width_), theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(buses_ * per_bus(width_)))) {
  if (width < 2) throw ValidationError("width", "needs at least 2 units per side");
}

std::size_t RawPolicyParams::per_bus(std::size_t width) { return 2 * (width - 1) + 2 * (width - 2); }

Eigen::Index RawPolicyParams::idx(std::size_t bus, int block) const {
  const auto s = static_cast<Eigen::Index>(width - 1);
  const auto g = static_cast<Eigen::Index>(width - 2);
  const Eigen::Index starts[] = {0, s, s + g, 2 * s + g};
  return static_cast<Eigen::Index>(offset(bus)) + starts[block];
}

namespace {

void check_raw(const RawPolicyParams& raw, std::size_t bus, const ConstraintConfig& cfg) {
  cfg.validate();
  if (raw.width != cfg.width) throw DimensionError("raw parameters have width " + std::to_string(raw.width) +
                                                   ", config expects " + std::to_string(cfg.width));
  if (static_cast<std::size_t>(raw.theta.size()) != raw.buses * RawPolicyParams::per_bus(raw.width)) {
    throw DimensionError("raw parameter vector has the wrong length");
  }
  if (bus >= raw.buses) throw DimensionError("bus index out of range");
}

// side = +1 builds (w+, b+), side = -1 builds (w-, b-)
void build_side(const Eigen::Ref<const Eigen::VectorXd>& slopes, const Eigen::Ref<const Eigen::VectorXd>& gaps,
                double edge, int side, const ConstraintConfig& cfg, Eigen::VectorXd& w, Eigen::VectorXd& b) {
  const auto d = static_cast<Eigen::Index>(cfg.width);
  w = Eigen::VectorXd::Zero(d);
  b = Eigen::VectorXd::Zero(d);
  double prev = 0.0;
  for (Eigen::Index m = 1; m < d; ++m) {
    const double a = slopes(m - 1);
    if (!std::isfinite(a)) throw ValidationError("raw slope", "non-finite value");
    const double prefix = side * (cfg.eps + cfg.slope_scale * softplus(a));
    w(m) = prefix - prev;
    prev = prefix;
  }
  b(1) = side > 0 ? -edge : edge;
  for (Eigen::Index m = 2; m < d; ++m) {
    const double c = gaps(m - 2);
    if (!std::isfinite(c)) throw ValidationError("raw bias decrement", "non-finite value");
    b(m) = b(m - 1) - cfg.gap_scale * softplus(c);
  }
}

}  // namespace

StackedReluParams constrain_bus(const RawPolicyParams& raw, std::size_t bus, double lower, double upper,
                                const ConstraintConfig& cfg) {
  check_raw(raw, bus, cfg);
  StackedReluParams p;
  p.lower = lower;
  p.upper = upper;
  build_side(raw.slopes_plus(bus), raw.gaps_plus(bus), upper, +1, cfg, p.w_plus, p.b_plus);
  build_side(raw.slopes_minus(bus), raw.gaps_minus(bus), lower, -1, cfg, p.w_minus, p.b_minus);
  return p;
}

std::vector<StackedReluParams> constrain(const RawPolicyParams& raw, const VoltageBand& band,
                                         const ConstraintConfig& cfg) {
  if (band.size() != raw.buses) throw DimensionError("band and raw parameters cover different bus counts");
  std::vector<StackedReluParams> out;
  out.reserve(raw.buses);
  for (std::size_t i = 0; i < raw.buses; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out.push_back(constrain_bus(raw, i, band.lower(k), band.upper(k), cfg));
  }
  return out;
}

double policy_eval(const StackedReluParams& p, double v) {
  double plus = 0.0;
  double minus = 0.0;
  for (Eigen::Index l = 0; l < p.w_plus.size(); ++l) plus += p.w_plus(l) * std::max(0.0, v + p.b_plus(l));
  for (Eigen::Index l = 0; l < p.w_minus.size(); ++l) minus += p.w_minus(l) * std::max(0.0, p.b_minus(l) - v);
  return 0.0 - (plus + minus);
}

double policy_input_grad(const StackedReluParams& p, double v) {
  double d = 0.0;
  for (Eigen::Index l = 0; l < p.w_plus.size(); ++l) {
    if (v + p.b_plus(l) >= 0.0) d -= p.w_plus(l);
  }
  for (Eigen::Index l = 0; l < p.w_minus.size(); ++l) {
    if (p.b_minus(l) - v > 0.0) d += p.w_minus(l);
  }
  return d;
}

void accumulate_param_grad(const RawPolicyParams& raw, const StackedReluParams& p, std::size_t bus, double v,
                           const ConstraintConfig& cfg, double scale, Eigen::Ref<Eigen::VectorXd> grad) {
  check_raw(raw, bus, cfg);
  if (grad.size() != raw.theta.size()) throw DimensionError("gradient buffer has the wrong length");
  const auto d = static_cast<Eigen::Index>(cfg.width);
  const auto base = static_cast<Eigen::Index>(raw.offset(bus));
  const Eigen::Index s = d - 1;
  const Eigen::Index g = d - 2;

  // u = -xi, so every partial of xi enters with a minus sign.
  auto side = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& b, int sign, Eigen::Index slope_at,
                  Eigen::Index gap_at) {
    Eigen::VectorXd r(d + 1);
    Eigen::VectorXd h(d);
    for (Eigen::Index l = 0; l < d; ++l) {
      const double z = sign > 0 ? v + b(l) : b(l) - v;
      r(l) = std::max(0.0, z);
      h(l) = sign > 0 ? (z >= 0.0 ? 1.0 : 0.0) : (z > 0.0 ? 1.0 : 0.0);
    }
    r(d) = 0.0;
    const auto& a = raw.theta;
    for (Eigen::Index m = 1; m < d; ++m) {
      const double dprefix = sign * cfg.slope_scale * sigmoid(a(base + slope_at + m - 1));
      grad(base + slope_at + m - 1) -= scale * dprefix * (r(m) - r(m + 1));
    }
    // c_{j-2} moves every kink from unit j outward
    double tail = 0.0;
    for (Eigen::Index j = d - 1; j >= 2; --j) {
      tail += w(j) * h(j);
      const double dgap = -cfg.gap_scale * sigmoid(a(base + gap_at + j - 2));
      grad(base + gap_at + j - 2) -= scale * dgap * tail;
    }
  };
  side(p.w_plus, p.b_plus, +1, 0, s);
  side(p.w_minus, p.b_minus, -1, s + g, 2 * s + g);
}

Eigen::VectorXd policy_param_grad(const RawPolicyParams& raw, const VoltageBand& band, std::size_t bus, double v,
                                  const ConstraintConfig& cfg) {
  const auto k = static_cast<Eigen::Index>(bus);
  if (bus >= band.size()) throw DimensionError("bus index out of range");
  const StackedReluParams p = constrain_bus(raw, bus, band.lower(k), band.upper(k), cfg);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(raw.theta.size());
  accumulate_param_grad(raw, p, bus, v, cfg, 1.0, grad);
  return grad;
}

std::vector<std::string> check_invariants(const StackedReluParams& p, double eps) {
  std::vector<std::string> bad;
  const Eigen::Index d = p.w_plus.size();
  if (d < 2 || p.b_plus.size() != d || p.w_minus.size() != d || p.b_minus.size() != d) {
    bad.push_back("inconsistent widths");
    return bad;
  }
  if (!p.w_plus.allFinite() || !p.b_plus.allFinite() || !p.w_minus.allFinite() || !p.b_minus.allFinite()) {
    bad.push_back("non-finite parameter");
    return bad;
  }
  if (!(p.lower < p.upper)) bad.push_back("band is empty");
  if (p.w_plus(0) != 0.0 || p.b_plus(0) != 0.0) bad.push_back("w+_0 and b+_0 must be zero");
  if (p.w_minus(0) != 0.0 || p.b_minus(0) != 0.0) bad.push_back("w-_0 and b-_0 must be zero");
  if (p.b_plus(1) != -p.upper) bad.push_back("b+_1 must equal -upper");
  if (p.b_minus(1) != p.lower) bad.push_back("b-_1 must equal lower");
  // rounding in the prefix reconstruction stays far below this
  const double floor = eps * (1.0 - 1e-9);
  double sp = 0.0;
  double sm = 0.0;
  for (Eigen::Index l = 1; l < d; ++l) {
    sp += p.w_plus(l);
    sm += p.w_minus(l);
    if (sp < floor) bad.push_back("prefix sum of w+ below eps at unit " + std::to_string(l));
    if (sm > -floor) bad.push_back("prefix sum of w- above -eps at unit " + std::to_string(l));
    if (l >= 2 && p.b_plus(l) > p.b_plus(l - 1)) bad.push_back("b+ increases at unit " + std::to_string(l));
    if (l >= 2 && p.b_minus(l) > p.b_minus(l - 1)) bad.push_back("b- increases at unit " + std::to_string(l));
  }
  return bad;
}

RawPolicyParams zero_raw(std::size_t buses, std::size_t width) { return RawPolicyParams(buses, width); }

RawPolicyParams random_raw(std::size_t buses, std::size_t width, std::mt19937_64& rng, double slope_lo,
                           double slope_hi, double gap_std) {
  if (!(slope_lo <= slope_hi) || !(gap_std >= 0.0)) throw ValidationError("random_raw", "empty range");
  RawPolicyParams raw(buses, width);
  std::uniform_real_distribution<double> slope(slope_lo, slope_hi);
  std::normal_distribution<double> gap(0.0, gap_std);
  for (std::size_t i = 0; i < buses; ++i) {
    for (auto& x : raw.slopes_plus(i)) x = slope(rng);
    for (auto& x : raw.gaps_plus(i)) x = gap(rng);
    for (auto& x : raw.slopes_minus(i)) x = slope(rng);
    for (auto& x : raw.gaps_minus(i)) x = gap(rng);
  }
  return raw;
}

double raw_for_slope(double slope, const ConstraintConfig& cfg) {
  const double y = (slope - cfg.eps) / cfg.slope_scale;
  if (!(y > 0.0)) throw ValidationError("slope", "must exceed eps");
  // inverse softplus
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

StackedReluPolicy::StackedReluPolicy(std::vector<StackedReluParams> buses) : buses_(std::move(buses)) {
  // The slope is constant between kinks, so checking just right of every
  // kink and once left of all of them finds the exact maximum.
  for (const StackedReluParams& p : buses_) {
    if (p.b_plus.size() != p.w_plus.size() || p.b_minus.size() != p.w_minus.size()) {
      throw DimensionError("stacked-ReLU weights and biases differ in length");
    }
    std::vector<double> kinks;
    for (Eigen::Index l = 0; l < p.b_plus.size(); ++l) kinks.push_back(-p.b_plus(l));
    for (Eigen::Index l = 0; l < p.b_minus.size(); ++l) kinks.push_back(p.b_minus(l));
    double lo = *std::min_element(kinks.begin(), kinks.end());
    lipschitz_ = std::max(lipschitz_, std::abs(policy_input_grad(p, lo - 1.0)));
    for (double k : kinks) lipschitz_ = std::max(lipschitz_, std::abs(policy_input_grad(p, k)));
  }
}

}  // namespace voltstab
