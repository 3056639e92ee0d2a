#include "pupinet/ablation.hpp"

#include <cstdio>
#include <fstream>

#include "pupinet/errors.hpp"

namespace pupinet {

namespace fs = std::filesystem;
using nlohmann::json;

size_t AblationGrid::cell_count() const {
  size_t n = 1;
  for (const auto& [key, values] : axes) n *= values.size();
  return n;
}

json AblationGrid::cell_document(size_t index) const {
  json doc = base;
  for (const auto& [key, values] : axes) {
    set_config_value(doc, key, values[index % values.size()]);
    index /= values.size();
  }
  return doc;
}

AblationGrid grid_from_json(const json& j) {
  if (!j.is_object() || !j.contains("base") || !j.contains("axes")) {
    throw ConfigError("grid must contain 'base' and 'axes'");
  }
  AblationGrid g;
  g.base = j.at("base");
  g.split = j.value("split", std::string("test"));
  const json& axes = j.at("axes");
  if (!axes.is_array()) throw ConfigError("grid 'axes' must be an array of {key, values}");
  for (const auto& a : axes) {
    if (!a.contains("key") || !a.contains("values") || !a.at("values").is_array() || a.at("values").empty()) {
      throw ConfigError("each grid axis needs a 'key' and a non-empty 'values' array");
    }
    g.axes.emplace_back(a.at("key").get<std::string>(), a.at("values").get<std::vector<json>>());
  }
  // Reject invalid cells up front rather than after hours of training.
  for (size_t i = 0; i < g.cell_count(); ++i) config_from_json(g.cell_document(i));
  return g;
}

AblationGrid load_grid(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid " + path.string());
  try {
    return grid_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("grid " + path.string() + ": " + e.what());
  }
}

std::string axis_header(const std::string& key) {
  static const std::pair<const char*, const char*> known[] = {
      {"modules.vsm_on", "VSM"},          {"modules.hfc_on", "HFC"},
      {"modules.attention_on", "Attn"},   {"modules.wavelet_on", "Wavelet"},
      {"loss.lambda_A", "λ_A"},           {"loss.lambda_B", "λ_B"},
      {"loss.lambda_C", "λ_C"},           {"loss.lambda_A_prime", "λ_A'"},
  };
  for (const auto& [k, v] : known) {
    if (key == k) return v;
  }
  return key;
}

namespace {

std::string cell_label(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "✓" : "";
  if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
  if (v.is_number()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

bool has_toggle_axis(const AblationGrid& g) {
  for (const auto& [key, values] : g.axes) {
    if (key.rfind("modules.", 0) == 0) return true;
  }
  return false;
}

}  // namespace

AblationResult run_ablation(const AblationGrid& grid, const Dataset& data, const Supervisors& sup) {
  AblationResult result;
  // Toggle grids read as "baseline + modules", so the baseline gets its own column.
  const bool baseline_col = has_toggle_axis(grid);
  if (baseline_col) result.headers.push_back("pix2pixGAN");
  for (const auto& [key, values] : grid.axes) result.headers.push_back(axis_header(key));

  for (size_t i = 0; i < grid.cell_count(); ++i) {
    TableRow row;
    if (baseline_col) row.labels.push_back("✓");
    size_t rem = i;
    for (const auto& [key, values] : grid.axes) {
      row.labels.push_back(cell_label(values[rem % values.size()]));
      rem /= values.size();
    }
    MetricsReport report;
    try {
      TrainConfig cfg = config_from_json(grid.cell_document(i));
      cfg.out_dir = (fs::path(cfg.out_dir) / ("cell_" + std::to_string(i))).string();
      Supervisors cell_sup;
      if (cfg.needs_vsm()) cell_sup.vsm = sup.vsm;
      if (cfg.needs_hfc()) cell_sup.hfc = sup.hfc;
      const auto trained = train(cfg, split_part(data, cfg.split_ratios, "train"), cell_sup);
      const Dataset part = split_part(data, cfg.split_ratios, grid.split);
      if (part.empty()) throw ConfigError("split '" + grid.split + "' is empty");
      report = evaluate_split(make_translator(trained.generator), part, cfg.direction, grid.split);
      row.metrics = report.mean;
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
    result.reports.push_back(std::move(report));
    result.rows.push_back(std::move(row));
  }
  result.table = format_metrics_table(result.headers, result.rows);
  return result;
}

AblationResult run_ablation(const AblationGrid& grid) {
  TrainConfig base = config_from_json(grid.base);
  if (base.dataset.empty()) throw ConfigError("grid base config has no data.path");
  Supervisors sup;
  bool need_vsm = false, need_hfc = false;
  for (size_t i = 0; i < grid.cell_count(); ++i) {
    const TrainConfig c = config_from_json(grid.cell_document(i));
    need_vsm |= c.needs_vsm();
    need_hfc |= c.needs_hfc();
  }
  if (need_vsm || need_hfc) {
    base.direction = Direction::OctToOcta;
    base.modules.vsm_on = need_vsm;
    base.modules.hfc_on = need_hfc;
    sup = load_supervisors(base);
  }
  return run_ablation(grid, load_dataset(base.dataset), sup);
}

}  // namespace pupinet
