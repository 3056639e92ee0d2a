#include "pupinet/discriminator.hpp"

#include <torch/torch.h>

#include "pupinet/errors.hpp"

namespace pupinet {

namespace nn = torch::nn;

PatchDiscriminator3dImpl::PatchDiscriminator3dImpl(DiscriminatorConfig c) : cfg(c) {
  if (cfg.n_stages < 1) throw std::invalid_argument("discriminator needs at least one stage");
  nn::Sequential seq;
  int64_t in = cfg.in_channels;
  for (int64_t i = 0; i < cfg.n_stages; ++i) {
    const int64_t out = cfg.base_width << i;
    seq->push_back(nn::Conv3d(nn::Conv3dOptions(in, out, 4).stride(2).padding(1).bias(i == 0)));
    if (i > 0) seq->push_back(nn::InstanceNorm3d(nn::InstanceNorm3dOptions(out).affine(true)));
    seq->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  seq->push_back(nn::Conv3d(nn::Conv3dOptions(in, 1, 3).padding(1)));
  body = register_module("body", seq);
}

torch::Tensor PatchDiscriminator3dImpl::forward(const torch::Tensor& condition,
                                                const torch::Tensor& candidate) {
  if (condition.sizes() != candidate.sizes()) {
    throw ShapeError("discriminator inputs must share dims");
  }
  return forward_pair(torch::cat({condition, candidate}, 1));
}

torch::Tensor PatchDiscriminator3dImpl::forward_pair(const torch::Tensor& pair) {
  if (pair.dim() != 5 || pair.size(1) != cfg.in_channels) {
    throw ShapeError("discriminator expects (N, " + std::to_string(cfg.in_channels) + ", D, H, W)");
  }
  const int64_t f = int64_t{1} << cfg.n_stages;
  for (int64_t a = 2; a < 5; ++a) {
    if (pair.size(a) % f != 0) {
      throw ShapeError("discriminator input dims must be divisible by 2^n_stages");
    }
  }
  return body->forward(pair);
}

}  // namespace pupinet
