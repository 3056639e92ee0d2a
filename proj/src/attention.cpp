#include "pupinet/attention.hpp"

#include <torch/torch.h>

#include "pupinet/errors.hpp"

namespace pupinet {

namespace nn = torch::nn;

namespace {

int64_t group_width(int64_t channels, int64_t groups) {
  if (channels < 1 || groups < 1 || channels % groups != 0) {
    throw ShapeError("attention channels (" + std::to_string(channels) +
                     ") must be a positive multiple of groups (" + std::to_string(groups) + ")");
  }
  return channels / groups;
}

}  // namespace

MultiScaleAttention3dImpl::MultiScaleAttention3dImpl(int64_t channels_, int64_t groups_)
    : channels(channels_), groups(groups_) {
  const int64_t g = group_width(channels, groups);
  pointwise = register_module("pointwise", nn::Conv3d(nn::Conv3dOptions(g, g, 1)));
  local = register_module("local", nn::Conv3d(nn::Conv3dOptions(g, g, 3).padding(1)));
  norm = register_module("norm", nn::GroupNorm(nn::GroupNormOptions(g, g).eps(1e-5)));
}

torch::Tensor MultiScaleAttention3dImpl::forward(const torch::Tensor& x, MsaTrace* trace) {
  if (x.dim() != 5 || x.size(1) != channels) {
    throw ShapeError("attention block expects (N, " + std::to_string(channels) + ", D, H, W)");
  }
  const int64_t n = x.size(0), d = x.size(2), h = x.size(3), w = x.size(4);
  const int64_t g = channels / groups;
  const int64_t ng = n * groups;

  auto gx = x.reshape({ng, g, d, h, w});

  auto along_d = gx.mean({3, 4});
  auto along_h = gx.mean({2, 4});
  auto along_w = gx.mean({2, 3});
  auto pooled = torch::cat({along_d, along_h, along_w}, 2).unsqueeze(-1).unsqueeze(-1);
  auto mixed = pointwise->forward(pooled).squeeze(-1).squeeze(-1);
  auto parts = mixed.split_with_sizes({d, h, w}, 2);
  auto gate = torch::sigmoid(parts[0]).view({ng, g, d, 1, 1}) *
              torch::sigmoid(parts[1]).view({ng, g, 1, h, 1}) *
              torch::sigmoid(parts[2]).view({ng, g, 1, 1, w});
  auto branch_a = norm->forward(gx * gate);
  auto branch_b = local->forward(gx);

  auto softmax_a = torch::softmax(branch_a.mean({2, 3, 4}), -1);
  auto softmax_b = torch::softmax(branch_b.mean({2, 3, 4}), -1);
  auto weights = torch::bmm(softmax_a.unsqueeze(1), branch_b.reshape({ng, g, d * h * w})) +
                 torch::bmm(softmax_b.unsqueeze(1), branch_a.reshape({ng, g, d * h * w}));
  auto out = gx * torch::sigmoid(weights.view({ng, 1, d, h, w}));

  if (trace) {
    trace->pointwise_softmax = softmax_a.detach();
    trace->local_softmax = softmax_b.detach();
  }
  return out.reshape({n, channels, d, h, w});
}

int64_t msa_param_count(int64_t channels, int64_t groups) {
  const int64_t g = group_width(channels, groups);
  return (g * g + g) + (27 * g * g + g) + 2 * g;
}

}  // namespace pupinet
