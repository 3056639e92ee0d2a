#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <torch/optim/adam.h>

#include "pupinet/config.hpp"
#include "pupinet/dataset.hpp"
#include "pupinet/discriminator.hpp"
#include "pupinet/generators.hpp"
#include "pupinet/losses.hpp"
#include "pupinet/metrics.hpp"
#include "pupinet/supervisors.hpp"

namespace pupinet {

struct Supervisors {
  std::optional<FrozenVsm> vsm;
  std::optional<FrozenHfc> hfc;

  // name -> digest for every present network
  std::map<std::string, std::string> digests() const;
  // Throws TrainingAbort if any present network no longer matches its digest.
  void verify() const;
};

// Loads the supervisors `cfg` needs. Throws TrainingAbort when a required
// checkpoint is missing or fails digest verification.
Supervisors load_supervisors(const TrainConfig& cfg);

struct TrainHooks {
  // Sees (and may edit) each report before the finiteness check.
  std::function<void(LossReport&)> on_report;
};

// Alternating discriminator / generator updates on a fixed training set.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset train_pairs, Supervisors sup);

  // One discriminator step followed by one generator step. Throws
  // TrainingAbort naming the first non-finite loss term before any parameter
  // is touched by that step's backward pass.
  LossReport step(const TrainHooks& hooks = {});

  // Mean L1 on the [0, 1] scale between generator outputs and targets over
  // the training set, without autograd.
  double train_l1();

  // Digests are re-verified first; a mismatch aborts without writing.
  void save_checkpoint(const std::filesystem::path& path);
  // Restores parameters, optimizer moments, controller and data/augment
  // streams, so continuing matches an uninterrupted run bit for bit.
  void resume(const std::filesystem::path& path);

  long steps_done() const { return step_; }
  const AdaState& ada() const { return ada_; }
  const TrainConfig& config() const { return cfg_; }
  const Supervisors& supervisors() const { return sup_; }
  GeneratorNet& generator() { return *gen_; }
  std::shared_ptr<GeneratorNet> generator_ptr() { return gen_; }
  PatchDiscriminator3d discriminator() { return disc_; }
  std::vector<torch::Tensor> generator_optimizer_params() const;
  std::vector<torch::Tensor> discriminator_optimizer_params() const;

 private:
  struct Batch {
    torch::Tensor source;    // [-1, 1]
    torch::Tensor target;    // [-1, 1]
  };
  Batch next_batch();
  torch::Tensor augment_pairs(const torch::Tensor& pairs);

  TrainConfig cfg_;
  Supervisors sup_;
  std::vector<torch::Tensor> sources_, targets_;
  std::shared_ptr<GeneratorNet> gen_;
  PatchDiscriminator3d disc_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_, opt_d_;
  AdaState ada_;
  std::vector<double> pending_signs_;
  int64_t d_steps_ = 0;
  std::mt19937_64 data_rng_, aug_rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
  long step_ = 0;
};

struct TrainResult {
  std::vector<LossReport> history;
  double initial_l1 = 0.0;  // train_l1() before the first step
  double final_l1 = 0.0;    // train_l1() after the last step
  AdaState ada;
  std::map<std::string, std::string> supervisor_digests;
  std::filesystem::path checkpoint;
  std::shared_ptr<GeneratorNet> generator;
};

// Total generator updates implied by steps / epochs.
int64_t planned_steps(const TrainConfig& cfg, int64_t n_train);

// Runs the full schedule on `train_pairs`, writing losses.csv, config.json and
// checkpoints into cfg.out_dir.
TrainResult train(const TrainConfig& cfg, const Dataset& train_pairs, const Supervisors& sup,
                  const TrainHooks& hooks = {});
// Loads cfg.dataset, splits it and the supervisors, then trains.
TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {});

struct Checkpoint {
  TrainConfig cfg;
  std::shared_ptr<GeneratorNet> generator;
  PatchDiscriminator3d discriminator{nullptr};
  AdaState ada;
  long step = 0;
  std::map<std::string, std::string> supervisor_digests;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Source volume on [0, 1] -> translated volume on [0, 1].
Volume3D translate(GeneratorNet& gen, const Volume3D& source);
Translator make_translator(std::shared_ptr<GeneratorNet> gen);

Dataset split_part(const Dataset& data, const std::array<double, 3>& ratios, const std::string& split);

// Scores a checkpoint on one split of `data` (or of the checkpoint's dataset).
MetricsReport evaluate_checkpoint(const std::filesystem::path& ckpt, const std::string& split,
                                  const std::optional<Dataset>& data = std::nullopt);

void apply_thread_policy();

}  // namespace pupinet
