#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "pupinet/ada.hpp"
#include "pupinet/discriminator.hpp"
#include "pupinet/generators.hpp"
#include "pupinet/losses.hpp"
#include "pupinet/volume.hpp"

namespace pupinet {

struct ModuleToggles {
  bool vsm_on = true;
  bool hfc_on = true;
  bool attention_on = true;
  bool wavelet_on = true;
  bool operator==(const ModuleToggles&) const = default;
};

// Everything a run needs. Serialises to a JSON document whose sections mirror
// the fields below; `seed` is mandatory when reading.
struct TrainConfig {
  Direction direction = Direction::OctToOcta;
  Dims3 dims = {32, 64, 64};
  uint64_t seed = 0;

  // data
  std::string dataset;  // root containing pairs/<id>/
  std::array<double, 3> split_ratios = {0.6, 1.0 / 15.0, 1.0 / 3.0};

  // schedule
  int64_t steps = 300;
  int64_t epochs = 0;  // when > 0, overrides steps with epochs * |train split| / batch
  int64_t batch_size = 1;
  int64_t grad_accumulation = 1;
  int64_t checkpoint_every = 0;  // 0: final checkpoint only

  // optimizer
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;

  // loss
  LossWeights weights;
  TvReduction tv_reduction = TvReduction::Sum;

  // adaptive augmentation
  bool ada_on = true;
  AdaState ada;

  ModuleToggles modules;

  // architecture
  int64_t gen_base_width = 16;
  int64_t gen_stages = 3;
  int64_t attention_groups = 4;
  int64_t disc_base_width = 16;
  int64_t disc_stages = 3;

  // supervisors
  std::string vsm_checkpoint;
  std::string hfc_checkpoint;
  int vsm_epochs = 30;
  int hfc_epochs = 30;
  double supervisor_lr = 1e-3;

  std::string out_dir = "run";

  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
  bool needs_vsm() const { return direction == Direction::OctToOcta && modules.vsm_on; }
  bool needs_hfc() const { return direction == Direction::OctToOcta && modules.hfc_on; }

  // Throws ConfigError on any inconsistent setting.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

// Sets a dotted key ("loss.lambda_A") inside a config document.
void set_config_value(nlohmann::json& doc, const std::string& dotted_key, const nlohmann::json& value);

}  // namespace pupinet
