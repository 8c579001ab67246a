#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voltstab/grid.hpp"

namespace voltstab {

/// A parsed network plus non-fatal findings (unknown keys are skipped and
/// reported here rather than rejected).
struct NetworkLoadResult {
  RadialNetwork network;
  std::vector<std::string> warnings;
};

/// JSON schema:
///   {"base_kv": 12.0, "v0": 1.0,
///    "buses": [{"id": 1, "v_lower": 0.95, "v_upper": 1.05}, ...],
///    "lines": [{"from": 0, "to": 1, "r": 0.02, "x": 0.05}, ...]}
/// base_kv, v0 and the per-bus bounds are optional.
NetworkLoadResult parse_network_json(const std::string& text);
NetworkLoadResult load_network(const std::filesystem::path& path);

std::string network_to_json(const RadialNetwork& network);
void save_network(const RadialNetwork& network, const std::filesystem::path& path);

}  // namespace voltstab
