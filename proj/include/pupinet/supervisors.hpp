#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "pupinet/dataset.hpp"
#include "pupinet/digest.hpp"
#include "pupinet/volume.hpp"

namespace pupinet {

// Vessel Structure Matcher: OCTA volume -> en-face vessel probability map.
// 3D conv stem, then a learned projection that softmax-pools features along
// depth, then a 2D conv head with a sigmoid.
struct VsmNetImpl : torch::nn::Module {
  explicit VsmNetImpl(Dims3 dims, int64_t width = 8);

  // (N, 1, D, H, W) on [0, 1] -> (N, 1, H, W) probabilities.
  torch::Tensor forward(const torch::Tensor& octa);
  torch::Tensor logits(const torch::Tensor& octa);

  Dims3 dims;
  torch::nn::Sequential stem{nullptr};
  torch::nn::Conv3d depth_score{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(VsmNet);

// Hierarchical Feature Calibration translator: full-depth projection ->
// projection of one retinal slab. 2D U-Net with Haar resampling and a
// residual output (prediction = input + correction).
struct HfcNetImpl : torch::nn::Module {
  HfcNetImpl(int64_t height, int64_t width, int64_t base_width = 16);

  // (N, 1, H, W) -> (N, 1, H, W)
  torch::Tensor forward(const torch::Tensor& proj);

  int64_t height;
  int64_t width;
  torch::nn::Sequential enc0{nullptr}, enc1{nullptr}, bottleneck{nullptr};
  torch::nn::Conv2d proj1{nullptr}, proj0{nullptr};
  torch::nn::Sequential dec1{nullptr}, dec0{nullptr};
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(HfcNet);

struct FrozenVsm {
  VsmNet net{nullptr};
  FrozenFlag flag;
};

struct FrozenHfc {
  HfcNet ilm_opl{nullptr};
  HfcNet opl_bm{nullptr};
  FrozenFlag ilm_opl_flag;
  FrozenFlag opl_bm_flag;
  LayerBoundaries boundaries;
};

Projection2D vsm_forward(VsmNet& net, const Volume3D& octa);
Projection2D hfc_forward(HfcNet& net, const Projection2D& proj);

// mean |vsm(fake) - vsm(real)|; the real branch is evaluated without autograd,
// so gradients reach `fake` only. Throws std::logic_error if `vsm` is not frozen.
torch::Tensor vsm_loss(const FrozenVsm& vsm, const torch::Tensor& fake, const torch::Tensor& real);

// mean |net(proj(real)) - net(proj(fake))| for one slab translator; gradients
// reach `fake` only. Throws std::logic_error if the net is not frozen.
torch::Tensor layer_proj_loss(const HfcNet& net, const FrozenFlag& flag, const torch::Tensor& real,
                              const torch::Tensor& fake);

// Dice of (prob >= threshold) against a binary mask; 1 when both are empty.
double dice(const Projection2D& prob, const Projection2D& mask, double threshold = 0.5);

struct SupervisorTrainOptions {
  double learning_rate = 1e-3;
  int64_t width = 0;  // 0 keeps the network default
};

struct VsmTrainResult {
  FrozenVsm vsm;
  std::vector<double> epoch_loss;
};

// Trains on (octa, vessel_mask) with per-pixel BCE + soft Dice, then freezes.
VsmTrainResult pretrain_vsm(const Dataset& data, int epochs, uint64_t seed,
                            const SupervisorTrainOptions& opt = {});

struct HfcTrainResult {
  FrozenHfc hfc;
  std::vector<double> ilm_opl_loss;
  std::vector<double> opl_bm_loss;
};

// Trains both slab translators with L1 on (full projection, slab projection)
// pairs built from each pair's OCTA volume and layer boundaries, then freezes.
HfcTrainResult pretrain_hfc(const Dataset& data, int epochs, uint64_t seed,
                            const SupervisorTrainOptions& opt = {});

// Archives carry the freeze-time digest in their manifest. Loading recomputes
// it and throws TrainingAbort when it is absent or does not match.
void save_vsm(const FrozenVsm& vsm, const std::filesystem::path& path);
FrozenVsm load_vsm(const std::filesystem::path& path);
void save_hfc(const FrozenHfc& hfc, const std::filesystem::path& path);
FrozenHfc load_hfc(const std::filesystem::path& path);

}  // namespace pupinet
