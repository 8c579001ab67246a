#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voltstab/grid.hpp"
#include "voltstab/mlp.hpp"
#include "voltstab/monotone_check.hpp"
#include "voltstab/policy.hpp"
#include "voltstab/stacked_relu.hpp"

namespace voltstab {

inline constexpr int kCheckpointFormatVersion = 1;

/// Strict loading refuses any stacked-ReLU checkpoint that fails the
/// monotonicity check; Audit loads it anyway so it can be certified (and
/// rejected with witnesses).
enum class LoadMode { Strict, Audit };

struct LoadedPolicy {
  std::string kind;  ///< stacked_relu, explicit_stacked_relu, mlp, linear_deadband
  VoltageBand band;
  std::shared_ptr<const Policy> policy;
  std::optional<RawPolicyParams> raw;
  ConstraintConfig constraint{};
  std::optional<MonotoneReport> monotone;  ///< filled for stacked-ReLU kinds
};

std::string stacked_relu_checkpoint(const RawPolicyParams& raw, const VoltageBand& band, const ConstraintConfig& cfg);
/// Arbitrary (possibly infeasible) stacked-ReLU weights.
std::string explicit_stacked_relu_checkpoint(const std::vector<StackedReluParams>& params);
std::string mlp_checkpoint(const std::vector<FeedForwardNet>& nets, const InputScaling& scaling,
                           const VoltageBand& band);
std::string linear_deadband_checkpoint(const VoltageBand& band);

/// Throws ParseError for malformed documents and ValidationError when a
/// strict load fails the monotonicity check.
LoadedPolicy parse_checkpoint(const std::string& text, LoadMode mode = LoadMode::Strict);
LoadedPolicy load_checkpoint(const std::filesystem::path& path, LoadMode mode = LoadMode::Strict);

}  // namespace voltstab
