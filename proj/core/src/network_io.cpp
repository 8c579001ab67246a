#include "voltstab/network_io.hpp"

#include <set>

#include <json.hpp>

#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

namespace {

using nlohmann::json;

void note_unknown_keys(const json& object, const std::set<std::string>& known, const std::string& where,
                       std::vector<std::string>& warnings) {
  for (const auto& item : object.items()) {
    if (!known.contains(item.key())) warnings.push_back("unknown key '" + item.key() + "' in " + where + " ignored");
  }
}

template <typename T>
T required(const json& object, const char* key, const std::string& where) {
  if (!object.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& object, const char* key, T fallback, const std::string& where) {
  if (!object.contains(key)) return fallback;
  return required<T>(object, key, where);
}

}  // namespace

NetworkLoadResult parse_network_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("network JSON: top level must be an object");

  std::vector<std::string> warnings;
  note_unknown_keys(doc, {"base_kv", "v0", "buses", "lines"}, "network", warnings);
  const double base_kv = optional(doc, "base_kv", kDefaultBaseKv, "network");
  const double v0 = optional(doc, "v0", kDefaultV0, "network");
  if (!doc.contains("buses") || !doc["buses"].is_array()) throw ParseError("network: 'buses' must be an array");
  if (!doc.contains("lines") || !doc["lines"].is_array()) throw ParseError("network: 'lines' must be an array");

  std::vector<Bus> buses;
  for (std::size_t k = 0; k < doc["buses"].size(); ++k) {
    const json& b = doc["buses"][k];
    const std::string where = "buses[" + std::to_string(k) + "]";
    if (!b.is_object()) throw ParseError(where + " must be an object");
    note_unknown_keys(b, {"id", "v_lower", "v_upper"}, where, warnings);
    buses.push_back({required<int>(b, "id", where), optional(b, "v_lower", kDefaultVLower, where),
                     optional(b, "v_upper", kDefaultVUpper, where)});
  }
  std::vector<Line> lines;
  for (std::size_t k = 0; k < doc["lines"].size(); ++k) {
    const json& l = doc["lines"][k];
    const std::string where = "lines[" + std::to_string(k) + "]";
    if (!l.is_object()) throw ParseError(where + " must be an object");
    note_unknown_keys(l, {"from", "to", "r", "x"}, where, warnings);
    lines.push_back({required<int>(l, "from", where), required<int>(l, "to", where), required<double>(l, "r", where),
                     required<double>(l, "x", where)});
  }
  return {RadialNetwork(std::move(buses), std::move(lines), v0, base_kv), std::move(warnings)};
}

NetworkLoadResult load_network(const std::filesystem::path& path) {
  return parse_network_json(read_text_file(path));
}

std::string network_to_json(const RadialNetwork& network) {
  json doc;
  doc["base_kv"] = network.base_kv();
  doc["v0"] = network.v0();
  doc["buses"] = json::array();
  for (const Bus& b : network.buses()) {
    doc["buses"].push_back({{"id", b.id}, {"v_lower", b.v_lower}, {"v_upper", b.v_upper}});
  }
  doc["lines"] = json::array();
  for (const Line& l : network.lines()) {
    doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}});
  }
  return doc.dump(2) + "\n";
}

void save_network(const RadialNetwork& network, const std::filesystem::path& path) {
  write_text_file(path, network_to_json(network));
}

}  // namespace voltstab
