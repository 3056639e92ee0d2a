#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pupinet/config.hpp"
#include "pupinet/dataset.hpp"
#include "pupinet/metrics.hpp"
#include "pupinet/trainer.hpp"

namespace pupinet {

// A base config document plus ordered axes of dotted-key overrides. Cells are
// the cartesian product with the first axis varying fastest.
//
//   {"base": {...config...},
//    "axes": [{"key": "modules.vsm_on", "values": [false, true]}, ...],
//    "split": "test"}
struct AblationGrid {
  nlohmann::json base;
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  std::string split = "test";

  size_t cell_count() const;
  // Config document of one cell, in product order.
  nlohmann::json cell_document(size_t index) const;
};

AblationGrid grid_from_json(const nlohmann::json& j);
AblationGrid load_grid(const std::filesystem::path& path);

struct AblationResult {
  std::vector<std::string> headers;
  std::vector<TableRow> rows;
  std::vector<MetricsReport> reports;  // empty report for failed cells
  std::string table;
};

// Column title for a grid key ("modules.vsm_on" -> "VSM", "loss.lambda_A" -> "λ_A").
std::string axis_header(const std::string& key);

// Trains every cell with the base seed and scores it on the grid split of
// `data`. A cell that throws is recorded in its row and the grid continues.
// Cell outputs go to <base out_dir>/cell_<i>.
AblationResult run_ablation(const AblationGrid& grid, const Dataset& data, const Supervisors& sup);
// Loads the dataset and whatever supervisors any cell needs from the base config.
AblationResult run_ablation(const AblationGrid& grid);

}  // namespace pupinet
