#include "pupinet/layers.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

namespace pupinet {

namespace nn = torch::nn;

ConvBlock3dImpl::ConvBlock3dImpl(int64_t in_channels, int64_t out_channels) {
  if (in_channels != out_channels) {
    reduce = register_module("reduce",
                             nn::Conv3d(nn::Conv3dOptions(in_channels, out_channels, 1).bias(false)));
  }
  conv = register_module(
      "conv", nn::Conv3d(nn::Conv3dOptions(out_channels, out_channels, 3).padding(1).bias(false)));
  norm = register_module("norm", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(out_channels).affine(true)));
}

torch::Tensor ConvBlock3dImpl::forward(torch::Tensor x) {
  if (reduce) x = reduce->forward(x);
  return torch::leaky_relu(norm->forward(conv->forward(x)), 0.2);
}

ResBlock3dImpl::ResBlock3dImpl(int64_t c) {
  auto opts = nn::Conv3dOptions(c, c, 3).padding(1).bias(false);
  conv1 = register_module("conv1", nn::Conv3d(opts));
  norm1 = register_module("norm1", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(c).affine(true)));
  conv2 = register_module("conv2", nn::Conv3d(opts));
  norm2 = register_module("norm2", nn::InstanceNorm3d(nn::InstanceNorm3dOptions(c).affine(true)));
}

torch::Tensor ResBlock3dImpl::forward(torch::Tensor x) {
  auto y = torch::leaky_relu(norm1->forward(conv1->forward(x)), 0.2);
  y = norm2->forward(conv2->forward(y));
  return torch::leaky_relu(x + y, 0.2);
}

namespace {

template <typename Conv>
bool init_conv(nn::Module& m, at::Generator& gen, double std) {
  auto* conv = m.as<Conv>();
  if (!conv) return false;
  conv->weight.normal_(0.0, std, gen);
  if (conv->bias.defined()) conv->bias.zero_();
  return true;
}

template <typename Norm>
bool init_norm(nn::Module& m) {
  auto* norm = m.as<Norm>();
  if (!norm) return false;
  if (norm->weight.defined()) norm->weight.fill_(1.0);
  if (norm->bias.defined()) norm->bias.zero_();
  return true;
}

}  // namespace

void init_weights(nn::Module& root, uint64_t seed, double std) {
  torch::NoGradGuard no_grad;
  at::Generator gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (auto& m : root.modules(/*include_self=*/true)) {
    init_conv<nn::Conv3dImpl>(*m, gen, std) || init_conv<nn::Conv2dImpl>(*m, gen, std) ||
        init_conv<nn::ConvTranspose3dImpl>(*m, gen, std) ||
        init_norm<nn::InstanceNorm3dImpl>(*m) || init_norm<nn::InstanceNorm2dImpl>(*m) ||
        init_norm<nn::GroupNormImpl>(*m);
  }
}

std::string module_type_label(const nn::Module& m) {
  std::string name = m.name();
  if (auto pos = name.rfind("::"); pos != std::string::npos) name = name.substr(pos + 2);
  if (name.size() > 4 && name.ends_with("Impl")) name.resize(name.size() - 4);
  return name;
}

}  // namespace pupinet
