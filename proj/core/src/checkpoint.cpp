#include "voltstab/checkpoint.hpp"

#include <json.hpp>

#include "voltstab/error.hpp"
#include "voltstab/text_format.hpp"

namespace voltstab {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Eigen::VectorXd read_vec(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_array()) throw ParseError(where + ": missing array '" + key + "'");
  const json& a = j[key];
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_number()) throw ParseError(where + "." + key + ": expected numbers");
    v(static_cast<Eigen::Index>(k)) = a[k].get<double>();
  }
  return v;
}

template <class T>
T read(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing '" + key + "'");
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": '" + key + "' has the wrong type");
  }
}

json band_json(const VoltageBand& band) { return {{"lower", vec(band.lower)}, {"upper", vec(band.upper)}}; }

VoltageBand read_band(const json& doc) {
  if (!doc.contains("band") || !doc["band"].is_object()) throw ParseError("checkpoint: missing 'band'");
  VoltageBand band{read_vec(doc["band"], "lower", "band"), read_vec(doc["band"], "upper", "band")};
  if (band.lower.size() != band.upper.size() || band.lower.size() == 0) {
    throw ParseError("checkpoint: band lower/upper lengths differ or are empty");
  }
  for (Eigen::Index i = 0; i < band.lower.size(); ++i) {
    if (!(band.lower(i) < band.upper(i))) throw ValidationError("band", "empty interval at bus " + std::to_string(i + 1));
  }
  return band;
}

json header(const std::string& kind) { return {{"format_version", kCheckpointFormatVersion}, {"kind", kind}}; }

void check_monotone(LoadedPolicy& out, LoadMode mode, double eps) {
  MonotoneCheckConfig mc;
  mc.eps = eps;
  out.monotone = verify_monotone(*out.policy, out.band, mc);
  if (mode == LoadMode::Strict && !out.monotone->passed()) {
    throw ValidationError("checkpoint", "policy fails the monotonicity check:\n" + out.monotone->summary());
  }
}

}  // namespace

std::string stacked_relu_checkpoint(const RawPolicyParams& raw, const VoltageBand& band, const ConstraintConfig& cfg) {
  cfg.validate();
  if (raw.buses != band.size() || raw.width != cfg.width) throw DimensionError("checkpoint: raw/band/config mismatch");
  json doc = header("stacked_relu");
  doc["eps"] = cfg.eps;
  doc["slope_scale"] = cfg.slope_scale;
  doc["gap_scale"] = cfg.gap_scale;
  doc["band"] = band_json(band);
  doc["buses"] = json::array();
  for (std::size_t i = 0; i < raw.buses; ++i) {
    doc["buses"].push_back({{"d", raw.width},
                            {"raw_slopes_plus", vec(raw.slopes_plus(i))},
                            {"raw_bias_decrements_plus", vec(raw.gaps_plus(i))},
                            {"raw_slopes_minus", vec(raw.slopes_minus(i))},
                            {"raw_bias_decrements_minus", vec(raw.gaps_minus(i))}});
  }
  return doc.dump(2) + "\n";
}

std::string explicit_stacked_relu_checkpoint(const std::vector<StackedReluParams>& params) {
  json doc = header("explicit_stacked_relu");
  VoltageBand band{Eigen::VectorXd(static_cast<Eigen::Index>(params.size())),
                   Eigen::VectorXd(static_cast<Eigen::Index>(params.size()))};
  doc["buses"] = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const StackedReluParams& p = params[i];
    band.lower(static_cast<Eigen::Index>(i)) = p.lower;
    band.upper(static_cast<Eigen::Index>(i)) = p.upper;
    doc["buses"].push_back(
        {{"w_plus", vec(p.w_plus)}, {"b_plus", vec(p.b_plus)}, {"w_minus", vec(p.w_minus)}, {"b_minus", vec(p.b_minus)}});
  }
  doc["band"] = band_json(band);
  return doc.dump(2) + "\n";
}

std::string mlp_checkpoint(const std::vector<FeedForwardNet>& nets, const InputScaling& scaling,
                           const VoltageBand& band) {
  if (nets.size() != band.size()) throw DimensionError("checkpoint: one network per bus expected");
  json doc = header("mlp");
  doc["band"] = band_json(band);
  doc["input_center"] = scaling.center;
  doc["input_scale"] = scaling.scale;
  doc["buses"] = json::array();
  for (const FeedForwardNet& net : nets) {
    json layers = json::array();
    for (std::size_t l = 0; l < net.layers(); ++l) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < net.weight(l).rows(); ++r) rows.push_back(vec(net.weight(l).row(r).transpose()));
      layers.push_back({{"weight", rows}, {"bias", vec(net.bias(l))}});
    }
    doc["buses"].push_back({{"sizes", net.sizes()}, {"layers", layers}});
  }
  return doc.dump(2) + "\n";
}

std::string linear_deadband_checkpoint(const VoltageBand& band) {
  json doc = header("linear_deadband");
  doc["band"] = band_json(band);
  return doc.dump(2) + "\n";
}

LoadedPolicy parse_checkpoint(const std::string& text, LoadMode mode) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("checkpoint: top level must be an object");
  const int version = read<int>(doc, "format_version", "checkpoint");
  if (version != kCheckpointFormatVersion) {
    throw ParseError("checkpoint: unsupported format_version " + std::to_string(version));
  }
  LoadedPolicy out;
  out.kind = read<std::string>(doc, "kind", "checkpoint");
  out.band = read_band(doc);
  const std::size_t n = out.band.size();
  auto buses = [&]() -> const json& {
    if (!doc.contains("buses") || !doc["buses"].is_array() || doc["buses"].size() != n) {
      throw ParseError("checkpoint: 'buses' must list one entry per band bus");
    }
    return doc["buses"];
  };

  if (out.kind == "stacked_relu") {
    out.constraint.eps = read<double>(doc, "eps", "checkpoint");
    out.constraint.slope_scale = doc.value("slope_scale", out.constraint.slope_scale);
    out.constraint.gap_scale = doc.value("gap_scale", out.constraint.gap_scale);
    const json& bj = buses();
    const auto d = read<std::size_t>(bj[0], "d", "buses[0]");
    out.constraint.width = d;
    out.constraint.validate();
    RawPolicyParams raw(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string where = "buses[" + std::to_string(i) + "]";
      if (read<std::size_t>(bj[i], "d", where) != d) throw ParseError(where + ": every bus must share the same d");
      const Eigen::VectorXd sp = read_vec(bj[i], "raw_slopes_plus", where);
      const Eigen::VectorXd gp = read_vec(bj[i], "raw_bias_decrements_plus", where);
      const Eigen::VectorXd sm = read_vec(bj[i], "raw_slopes_minus", where);
      const Eigen::VectorXd gm = read_vec(bj[i], "raw_bias_decrements_minus", where);
      const auto ns = static_cast<Eigen::Index>(d - 1);
      const auto ng = static_cast<Eigen::Index>(d - 2);
      if (sp.size() != ns || sm.size() != ns || gp.size() != ng || gm.size() != ng) {
        throw ParseError(where + ": raw vectors need d-1 slopes and d-2 bias decrements");
      }
      raw.slopes_plus(i) = sp;
      raw.gaps_plus(i) = gp;
      raw.slopes_minus(i) = sm;
      raw.gaps_minus(i) = gm;
    }
    out.policy = std::make_shared<StackedReluPolicy>(constrain(raw, out.band, out.constraint));
    out.raw = std::move(raw);
    check_monotone(out, mode, out.constraint.eps);
  } else if (out.kind == "explicit_stacked_relu") {
    const json& bj = buses();
    std::vector<StackedReluParams> params;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string where = "buses[" + std::to_string(i) + "]";
      StackedReluParams p{read_vec(bj[i], "w_plus", where), read_vec(bj[i], "b_plus", where),
                          read_vec(bj[i], "w_minus", where), read_vec(bj[i], "b_minus", where),
                          out.band.lower(static_cast<Eigen::Index>(i)), out.band.upper(static_cast<Eigen::Index>(i))};
      if (p.b_plus.size() != p.w_plus.size() || p.b_minus.size() != p.w_minus.size()) {
        throw ParseError(where + ": weights and biases differ in length");
      }
      params.push_back(std::move(p));
    }
    out.constraint.eps = doc.value("eps", out.constraint.eps);
    out.policy = std::make_shared<StackedReluPolicy>(std::move(params));
    check_monotone(out, mode, out.constraint.eps);
  } else if (out.kind == "mlp") {
    const InputScaling scaling{read<double>(doc, "input_center", "checkpoint"),
                               read<double>(doc, "input_scale", "checkpoint")};
    const json& bj = buses();
    std::vector<FeedForwardNet> nets;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string where = "buses[" + std::to_string(i) + "]";
      FeedForwardNet net(read<std::vector<std::size_t>>(bj[i], "sizes", where));
      if (!bj[i].contains("layers") || bj[i]["layers"].size() != net.layers()) {
        throw ParseError(where + ": layer count does not match sizes");
      }
      for (std::size_t l = 0; l < net.layers(); ++l) {
        const json& layer = bj[i]["layers"][l];
        const std::string lw = where + ".layers[" + std::to_string(l) + "]";
        if (!layer.contains("weight") || layer["weight"].size() != static_cast<std::size_t>(net.weight(l).rows())) {
          throw ParseError(lw + ": weight has the wrong row count");
        }
        for (Eigen::Index r = 0; r < net.weight(l).rows(); ++r) {
          const json& row = layer["weight"][static_cast<std::size_t>(r)];
          if (!row.is_array() || row.size() != static_cast<std::size_t>(net.weight(l).cols())) {
            throw ParseError(lw + ": weight row " + std::to_string(r) + " has the wrong length");
          }
          for (Eigen::Index c = 0; c < net.weight(l).cols(); ++c) {
            const json& x = row[static_cast<std::size_t>(c)];
            if (!x.is_number()) throw ParseError(lw + ": weights must be numbers");
            net.weight(l)(r, c) = x.get<double>();
          }
        }
        net.bias(l) = read_vec(layer, "bias", lw);
        if (net.bias(l).size() != net.weight(l).rows()) throw ParseError(lw + ": bias has the wrong length");
      }
      nets.push_back(std::move(net));
    }
    out.policy = std::make_shared<MlpPolicy>(std::move(nets), scaling);
  } else if (out.kind == "linear_deadband") {
    out.policy = std::make_shared<LinearDeadbandPolicy>(out.band);
  } else {
    throw ParseError("checkpoint: unknown kind '" + out.kind + "'");
  }
  return out;
}

LoadedPolicy load_checkpoint(const std::filesystem::path& path, LoadMode mode) {
  return parse_checkpoint(read_text_file(path), mode);
}

}  // namespace voltstab
