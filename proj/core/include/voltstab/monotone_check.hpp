#pragma once

#include <string>
#include <vector>

#include "voltstab/grid.hpp"
#include "voltstab/policy.hpp"

namespace voltstab {

struct MonotoneCheckConfig {
  double margin = 0.5;        ///< grid spans [lower - margin, upper + margin]
  std::size_t points = 10000;  ///< per bus
  double eps = 1e-3;
  std::size_t max_witnesses = 8;  ///< per clause

  void validate() const;
};

struct Witness {
  std::size_t bus = 0;
  double v = 0.0;
  std::string detail;
};

struct ClauseResult {
  std::string name;
  bool passed = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::vector<Witness> witnesses;

  void fail(Witness w, std::size_t cap);
};

/// Sampled monotonicity report for any decentralized policy:
///   zero_in_band          g is exactly 0 on in-band samples
///   nonincreasing         g(v_k+1) <= g(v_k) along the grid
///   strict_outside_band   slope <= -eps outside the band
///   terminal_slope        |slope| >= eps at both grid ends
struct MonotoneReport {
  std::vector<ClauseResult> clauses;

  bool passed() const;
  const ClauseResult& clause(const std::string& name) const;
  std::string summary() const;
};

MonotoneReport verify_monotone(const Policy& policy, const VoltageBand& band, const MonotoneCheckConfig& cfg = {});

}  // namespace voltstab
