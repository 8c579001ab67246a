#include "voltstab/monotone_check.hpp"

#include <cmath>
#include <sstream>

#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

void MonotoneCheckConfig::validate() const {
  if (!(margin > 0.0)) throw ValidationError("margin", "must be positive");
  if (points < 2) throw ValidationError("points", "need at least 2 grid points");
  if (!(eps > 0.0)) throw ValidationError("eps", "must be positive");
}

void ClauseResult::fail(Witness w, std::size_t cap) {
  passed = false;
  ++violations;
  if (witnesses.size() < cap) witnesses.push_back(std::move(w));
}

bool MonotoneReport::passed() const {
  for (const ClauseResult& c : clauses) {
    if (!c.passed) return false;
  }
  return true;
}

const ClauseResult& MonotoneReport::clause(const std::string& name) const {
  for (const ClauseResult& c : clauses) {
    if (c.name == name) return c;
  }
  throw ValidationError("clause", "no clause named '" + name + "'");
}

std::string MonotoneReport::summary() const {
  std::ostringstream out;
  for (const ClauseResult& c : clauses) {
    out << c.name << ": " << (c.passed ? "pass" : "FAIL") << " (" << c.violations << "/" << c.checked << ")\n";
    for (const Witness& w : c.witnesses) {
      out << "  bus " << w.bus + 1 << " v=" << format_real(w.v) << " " << w.detail << "\n";
    }
  }
  return out.str();
}

MonotoneReport verify_monotone(const Policy& policy, const VoltageBand& band, const MonotoneCheckConfig& cfg) {
  cfg.validate();
  if (policy.size() != band.size()) throw DimensionError("policy and band cover different bus counts");
  ClauseResult zero{"zero_in_band", true, 0, 0, {}};
  ClauseResult nonincreasing{"nonincreasing", true, 0, 0, {}};
  ClauseResult strict{"strict_outside_band", true, 0, 0, {}};
  ClauseResult terminal{"terminal_slope", true, 0, 0, {}};
  const std::size_t cap = cfg.max_witnesses;
  // Tolerates rounding in sums of many ReLU terms; a genuine violation moves
  // g by at least eps * spacing, orders of magnitude more.
  constexpr double kRoundoff = 1e-12;
  const double slope_floor = cfg.eps * (1.0 - 1e-9);

  for (std::size_t i = 0; i < policy.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double lo = band.lower(k) - cfg.margin;
    const double hi = band.upper(k) + cfg.margin;
    const double step = (hi - lo) / static_cast<double>(cfg.points - 1);
    double prev = 0.0;
    for (std::size_t j = 0; j < cfg.points; ++j) {
      const double v = j + 1 == cfg.points ? hi : lo + step * static_cast<double>(j);
      const double g = policy.act(i, v);
      const double s = policy.slope(i, v);
      const bool inside = v >= band.lower(k) && v <= band.upper(k);
      if (inside) {
        ++zero.checked;
        if (g != 0.0) zero.fail({i, v, "g=" + format_real(g)}, cap);
      } else {
        ++strict.checked;
        if (!(s <= -slope_floor)) strict.fail({i, v, "slope=" + format_real(s)}, cap);
      }
      if (j > 0) {
        ++nonincreasing.checked;
        if (!(g <= prev + kRoundoff * (1.0 + std::abs(prev)))) {
          nonincreasing.fail({i, v, "g rises from " + format_real(prev) + " to " + format_real(g)}, cap);
        }
      }
      prev = g;
    }
    for (double v : {lo, hi}) {
      ++terminal.checked;
      const double s = policy.slope(i, v);
      if (!(std::abs(s) >= slope_floor)) terminal.fail({i, v, "slope=" + format_real(s)}, cap);
    }
  }
  return MonotoneReport{{zero, nonincreasing, strict, terminal}};
}

}  // namespace voltstab
