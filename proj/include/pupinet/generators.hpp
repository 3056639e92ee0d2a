#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/conv.h>

#include "pupinet/attention.hpp"
#include "pupinet/direction.hpp"
#include "pupinet/layers.hpp"
#include "pupinet/volume.hpp"

namespace pupinet {

struct GeneratorConfig {
  Direction direction = Direction::OctToOcta;
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  int64_t base_width = 16;
  int64_t n_stages = 3;
  int64_t attention_groups = 4;
  // Only meaningful for OctToOcta; the residual generator has neither.
  bool attention_on = true;
  bool wavelet_on = true;

  void validate() const;
  // Throws ShapeError unless each axis is divisible by 2^n_stages.
  void check_input(Dims3 dims) const;
};

// Volume-to-volume translator. Input and output live on [-1, 1] as (N, C, D, H, W);
// outputs are strictly inside (-1, 1) through a final tanh.
class GeneratorNet : public torch::nn::Module {
 public:
  explicit GeneratorNet(GeneratorConfig cfg) : cfg_(cfg) {}
  virtual torch::Tensor forward(const torch::Tensor& x) = 0;
  const GeneratorConfig& config() const { return cfg_; }

 protected:
  GeneratorConfig cfg_;
};

// OCT -> OCTA: encoder stages conv -> attention -> Haar downsample (subbands
// stacked on channels); decoder stages mirror that with conv -> attention ->
// 1x1x1 subband projection -> inverse Haar, then concatenate the encoder skip.
class WaveletAttentionGenerator : public GeneratorNet {
 public:
  explicit WaveletAttentionGenerator(GeneratorConfig cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::ModuleList enc_conv_, enc_attn_, down_;
  torch::nn::ModuleList dec_conv_, dec_attn_, dec_proj_, up_;
  ConvBlock3d final_{nullptr};
  torch::nn::Conv3d head_{nullptr};
};

// OCTA -> OCT: residual U-Net with strided-conv downsampling and
// transposed-conv upsampling.
class ResUNetGenerator : public GeneratorNet {
 public:
  explicit ResUNetGenerator(GeneratorConfig cfg);
  torch::Tensor forward(const torch::Tensor& x) override;

 private:
  torch::nn::Sequential stem_{nullptr};
  torch::nn::ModuleList enc_res_, down_, up_, fuse_, dec_res_;
  ResBlock3d bottleneck_{nullptr};
  torch::nn::Conv3d head_{nullptr};
};

std::shared_ptr<GeneratorNet> make_generator(const GeneratorConfig& cfg, uint64_t seed);

struct ManifestRow {
  std::string layer;
  std::string type;
  std::vector<std::vector<int64_t>> shapes;  // one per directly owned parameter
  int64_t count = 0;
};

// One row per submodule in traversal order (parameter-free layers included).
std::vector<ManifestRow> gen_param_summary(const GeneratorConfig& cfg);
std::vector<ManifestRow> module_manifest(const torch::nn::Module& root);
std::string format_manifest(const std::vector<ManifestRow>& rows);

}  // namespace pupinet
