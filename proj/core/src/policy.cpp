#include "voltstab/policy.hpp"

#include "voltstab/error.hpp"

namespace voltstab {

Eigen::VectorXd Policy::operator()(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != size()) {
    throw DimensionError("policy expects " + std::to_string(size()) + " voltages, got " + std::to_string(v.size()));
  }
  Eigen::VectorXd u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) u(i) = act(static_cast<std::size_t>(i), v(i));
  return u;
}

Eigen::VectorXd Policy::slopes(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != size()) {
    throw DimensionError("policy expects " + std::to_string(size()) + " voltages, got " + std::to_string(v.size()));
  }
  Eigen::VectorXd d(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) d(i) = slope(static_cast<std::size_t>(i), v(i));
  return d;
}

double linear_deadband(double v, double lower, double upper) {
  if (v > upper) return upper - v;
  if (v < lower) return lower - v;
  return 0.0;
}

double LinearDeadbandPolicy::act(std::size_t bus, double v) const {
  const auto i = static_cast<Eigen::Index>(bus);
  return linear_deadband(v, band_.lower(i), band_.upper(i));
}

double LinearDeadbandPolicy::slope(std::size_t bus, double v) const {
  const auto i = static_cast<Eigen::Index>(bus);
  // Right-hand derivative: the upper kink already has slope -1 to its right.
  return (v >= band_.upper(i) || v < band_.lower(i)) ? -1.0 : 0.0;
}

}  // namespace voltstab
