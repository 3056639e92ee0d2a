#pragma once

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/normalization.h>
#include <torch/nn/pimpl.h>

namespace pupinet {

// Softmax weight vectors produced by the cross-spatial aggregation, one row
// per (sample, group): shape (N * groups, channels / groups).
struct MsaTrace {
  torch::Tensor pointwise_softmax;
  torch::Tensor local_softmax;
};

// Multi-scale attention with cross-spatial aggregation over 3D feature maps.
//
// Channels are folded into `groups` independent groups that share parameters.
// Per group:
//   pointwise branch  pool along each spatial axis, mix with a 1x1x1 conv, and
//                     gate the input by the three axis sigmoids, then GroupNorm
//   local branch      3x3x3 conv
//   aggregation       softmax(pool(pointwise)) weights the local map and
//                     softmax(pool(local)) weights the pointwise map; their sum
//                     is a per-voxel logit that gates the group input.
// Output shape equals input shape.
struct MultiScaleAttention3dImpl : torch::nn::Module {
  MultiScaleAttention3dImpl(int64_t channels, int64_t groups = 4);

  torch::Tensor forward(const torch::Tensor& x, MsaTrace* trace = nullptr);

  int64_t channels;
  int64_t groups;
  torch::nn::Conv3d pointwise{nullptr};
  torch::nn::Conv3d local{nullptr};
  torch::nn::GroupNorm norm{nullptr};
};
TORCH_MODULE(MultiScaleAttention3d);

// Learnable scalars of one block: with g = channels / groups,
// pointwise g*g + g, local 27*g*g + g, GroupNorm 2*g.
int64_t msa_param_count(int64_t channels, int64_t groups);

}  // namespace pupinet
