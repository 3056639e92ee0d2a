#pragma once

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/pimpl.h>

namespace pupinet {

struct DiscriminatorConfig {
  int64_t in_channels = 2;  // condition + candidate
  int64_t base_width = 16;
  int64_t n_stages = 3;     // stride-2 stages; logits grid is input / 2^n_stages
};

// 3D patch critic over channel-concatenated (condition, candidate) volumes.
// Stride-2 4x4x4 convs with instance norm on all but the first, then a 3x3x3
// conv to one logit per receptive patch.
struct PatchDiscriminator3dImpl : torch::nn::Module {
  explicit PatchDiscriminator3dImpl(DiscriminatorConfig cfg = {});

  torch::Tensor forward(const torch::Tensor& condition, const torch::Tensor& candidate);
  // `pair` is the (N, 2, D, H, W) concatenation, e.g. after augmentation.
  torch::Tensor forward_pair(const torch::Tensor& pair);

  DiscriminatorConfig cfg;
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(PatchDiscriminator3d);

}  // namespace pupinet
