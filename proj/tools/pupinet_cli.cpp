// pupinet command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime abort.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "pupinet/ablation.hpp"
#include "pupinet/config.hpp"
#include "pupinet/dataset.hpp"
#include "pupinet/errors.hpp"
#include "pupinet/metrics.hpp"
#include "pupinet/supervisors.hpp"
#include "pupinet/trainer.hpp"
#include "pupinet/volume_io.hpp"

namespace fs = std::filesystem;
using namespace pupinet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;

Dims3 parse_dims(const std::string& s) {
  Dims3 d;
  char x1 = 0, x2 = 0;
  std::istringstream in(s);
  if (!(in >> d.d >> x1 >> d.h >> x2 >> d.w) || x1 != 'x' || x2 != 'x' || !in.eof()) {
    throw ConfigError("--dims must look like DxHxW, got '" + s + "'");
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

int cmd_phantom(uint64_t seed, const std::string& dims, int64_t n_pairs, int n_vessels, const std::string& out) {
  if (n_pairs < 1) throw ConfigError("--n-pairs must be >= 1");
  const Dataset data = make_phantom_dataset(seed, n_pairs, parse_dims(dims), n_vessels);
  write_dataset(data, out);
  std::printf("wrote %lld pairs to %s\n", static_cast<long long>(n_pairs), out.c_str());
  return 0;
}

int cmd_pretrain(const std::string& which, const std::string& config_path) {
  const TrainConfig cfg = load_config(config_path);
  if (cfg.dataset.empty()) throw ConfigError("config data.path is empty");
  const Dataset data = load_dataset(cfg.dataset);
  const Dataset train = split_part(data, cfg.split_ratios, "train");
  const Dataset val = split_part(data, cfg.split_ratios, "val");
  SupervisorTrainOptions opt;
  opt.learning_rate = cfg.supervisor_lr;
  if (which == "vsm") {
    if (cfg.vsm_checkpoint.empty()) throw ConfigError("supervisors.vsm_checkpoint is empty");
    auto r = pretrain_vsm(train, cfg.vsm_epochs, cfg.seed, opt);
    save_vsm(r.vsm, cfg.vsm_checkpoint);
    double d = 0.0;
    for (const auto& p : val) d += dice(vsm_forward(r.vsm.net, p.octa), p.vessel_mask);
    if (!val.empty()) std::printf("val dice %.4f over %zu pairs\n", d / val.size(), val.size());
    std::printf("vsm digest %s -> %s\n", r.vsm.flag.digest.c_str(), cfg.vsm_checkpoint.c_str());
  } else {
    if (cfg.hfc_checkpoint.empty()) throw ConfigError("supervisors.hfc_checkpoint is empty");
    auto r = pretrain_hfc(train, cfg.hfc_epochs, cfg.seed, opt);
    save_hfc(r.hfc, cfg.hfc_checkpoint);
    std::printf("hfc digests %s %s -> %s\n", r.hfc.ilm_opl_flag.digest.c_str(), r.hfc.opl_bm_flag.digest.c_str(),
                cfg.hfc_checkpoint.c_str());
  }
  return 0;
}

int cmd_train(const std::string& config_path) {
  const TrainConfig cfg = load_config(config_path);
  const auto r = train(cfg);
  std::printf("steps %zu  train L1 %.6f -> %.6f  ada p %.3f\ncheckpoint %s\n", r.history.size(), r.initial_l1,
              r.final_l1, r.ada.p, r.checkpoint.c_str());
  return 0;
}

int cmd_translate(const std::string& ckpt, const std::string& in, const std::string& out,
                  const std::string& direction) {
  const Direction want = [&] {
    try {
      return direction_from_string(direction);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }();
  Checkpoint c = load_checkpoint(ckpt);
  if (c.cfg.direction != want) {
    throw ConfigError("checkpoint translates " + to_string(c.cfg.direction) + ", requested " + direction);
  }
  const Volume3D src = load_volume(in);
  try {
    save_volume(translate(*c.generator, src), out);
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  return 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& split, const std::string& data, const std::string& out) {
  std::optional<Dataset> override_data;
  if (!data.empty()) override_data = load_dataset(data);
  const MetricsReport r = evaluate_checkpoint(ckpt, split, override_data);
  if (!out.empty()) write_text(out, r.csv());
  std::cout << r.csv();
  return 0;
}

int cmd_ablate(const std::string& grid_path, const std::string& out) {
  const AblationResult r = run_ablation(load_grid(grid_path));
  if (!out.empty()) write_text(out, r.table);
  std::cout << r.table;
  for (size_t i = 0; i < r.rows.size(); ++i) {
    if (!r.rows[i].failure.empty()) std::fprintf(stderr, "cell %zu failed: %s\n", i, r.rows[i].failure.c_str());
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& csvs) {
  std::vector<TableRow> rows;
  for (const auto& path : csvs) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const MetricsReport r = read_metrics_csv(buf.str());
    rows.push_back({{fs::path(path).stem().string()}, r.mean, ""});
  }
  std::cout << format_metrics_table({"run"}, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pupinet: 3D OCT <-> OCTA translation"};
  app.require_subcommand(1);

  auto* phantom = app.add_subcommand("phantom", "synthetic OCT/OCTA pairs");
  auto* gen = phantom->add_subcommand("gen", "generate a phantom dataset");
  phantom->require_subcommand(1);
  uint64_t seed = 0;
  std::string dims = "32x64x64", out;
  int64_t n_pairs = 1;
  int n_vessels = kDefaultVessels;
  gen->add_option("--seed", seed)->required();
  gen->add_option("--dims", dims, "DxHxW")->capture_default_str();
  gen->add_option("--n-pairs", n_pairs)->capture_default_str();
  gen->add_option("--n-vessels", n_vessels)->capture_default_str();
  gen->add_option("--out", out)->required();

  auto* pretrain = app.add_subcommand("pretrain", "train and freeze a supervisor");
  std::string which, config;
  pretrain->add_option("which", which)->required()->check(CLI::IsMember({"vsm", "hfc"}));
  pretrain->add_option("--config", config)->required();

  auto* train_cmd = app.add_subcommand("train", "main adversarial training");
  train_cmd->add_option("--config", config)->required();

  auto* translate_cmd = app.add_subcommand("translate", "run a trained generator on one volume");
  std::string ckpt, in, direction;
  translate_cmd->add_option("--ckpt", ckpt)->required();
  translate_cmd->add_option("--in", in)->required();
  translate_cmd->add_option("--out", out)->required();
  translate_cmd->add_option("--direction", direction)->required();

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on one split");
  std::string split = "test", data;
  evaluate->add_option("--ckpt", ckpt)->required();
  evaluate->add_option("--split", split)->capture_default_str();
  evaluate->add_option("--data", data, "dataset root overriding the checkpoint config");
  evaluate->add_option("--out", out, "also write the CSV here");

  auto* ablate = app.add_subcommand("ablate", "train and score every cell of a grid");
  std::string grid;
  ablate->add_option("--grid", grid)->required();
  ablate->add_option("--out", out, "also write the table here");

  auto* report = app.add_subcommand("report", "tabulate metrics CSVs");
  std::vector<std::string> csvs;
  report->add_option("--csv", csvs)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  apply_thread_policy();
  try {
    if (*gen) return cmd_phantom(seed, dims, n_pairs, n_vessels, out);
    if (*pretrain) return cmd_pretrain(which, config);
    if (*train_cmd) return cmd_train(config);
    if (*translate_cmd) return cmd_translate(ckpt, in, out, direction);
    if (*evaluate) return cmd_evaluate(ckpt, split, data, out);
    if (*ablate) return cmd_ablate(grid, out);
    if (*report) return cmd_report(csvs);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const TrainingAbort& e) {
    std::fprintf(stderr, "abort: %s\n", e.what());
    return kExitAbort;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitAbort;
  }
  return 0;
}
