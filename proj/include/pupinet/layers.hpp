#pragma once

#include <cstdint>
#include <string>

#include <torch/nn/module.h>
#include <torch/nn/modules/activation.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/instancenorm.h>
#include <torch/nn/pimpl.h>

namespace pupinet {

// [1x1x1 conv when widths differ] -> 3x3x3 conv -> InstanceNorm -> LeakyReLU(0.2).
// Convs carry no bias since the affine norm follows.
struct ConvBlock3dImpl : torch::nn::Module {
  ConvBlock3dImpl(int64_t in_channels, int64_t out_channels);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv3d reduce{nullptr};
  torch::nn::Conv3d conv{nullptr};
  torch::nn::InstanceNorm3d norm{nullptr};
};
TORCH_MODULE(ConvBlock3d);

// x + (conv-norm-act-conv-norm)(x), followed by LeakyReLU(0.2).
struct ResBlock3dImpl : torch::nn::Module {
  explicit ResBlock3dImpl(int64_t channels);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv3d conv1{nullptr}, conv2{nullptr};
  torch::nn::InstanceNorm3d norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(ResBlock3d);

// Conv weights ~ N(0, 0.02) drawn from a generator seeded with `seed` in
// module traversal order; conv biases zero; norm scales 1 and shifts 0.
void init_weights(torch::nn::Module& root, uint64_t seed, double std = 0.02);

// "Conv3d", "InstanceNorm3d", "MultiScaleAttention3d", ... for a module.
std::string module_type_label(const torch::nn::Module& m);

}  // namespace pupinet
