#include "pupinet/generators.hpp"

#include <sstream>

#include <torch/torch.h>

#include "pupinet/wavelet.hpp"

namespace pupinet {

namespace nn = torch::nn;

std::string to_string(Direction d) {
  return d == Direction::OctToOcta ? "oct2octa" : "octa2oct";
}

Direction direction_from_string(const std::string& s) {
  if (s == "oct2octa" || s == "oct->octa") return Direction::OctToOcta;
  if (s == "octa2oct" || s == "octa->oct") return Direction::OctaToOct;
  throw std::invalid_argument("unknown direction '" + s + "' (expected oct2octa or octa2oct)");
}

void GeneratorConfig::validate() const {
  if (n_stages < 1) throw std::invalid_argument("generator needs n_stages >= 1");
  if (base_width < 1 || in_channels < 1 || out_channels < 1) {
    throw std::invalid_argument("generator widths must be positive");
  }
  if (direction == Direction::OctToOcta && attention_on) {
    for (int64_t i = 0; i <= n_stages; ++i) {
      const int64_t width = base_width << i;
      if (width % attention_groups != 0) {
        throw ShapeError("attention groups must divide every stage width");
      }
    }
  }
}

void GeneratorConfig::check_input(Dims3 dims) const {
  const int64_t f = int64_t{1} << n_stages;
  if (dims.d % f || dims.h % f || dims.w % f) {
    throw ShapeError("input dims " + dims.str() + " are not divisible by 2^" +
                     std::to_string(n_stages));
  }
}

namespace {

Dims3 spatial_dims(const torch::Tensor& x) {
  if (x.dim() != 5) throw ShapeError("generator expects an (N, C, D, H, W) tensor");
  return {x.size(2), x.size(3), x.size(4)};
}

}  // namespace

// Stage widths: w_i = base * 2^i. Encoder stage i maps its input to w_i and
// the downsampler lifts w_i to 8*w_i at half resolution. Decoder stage i runs
// at level i+1 on 2*w_i features and projects to the 8*w_i subbands of level i.
WaveletAttentionGenerator::WaveletAttentionGenerator(GeneratorConfig cfg) : GeneratorNet(cfg) {
  cfg_.validate();
  const int64_t n = cfg_.n_stages;
  auto width = [&](int64_t i) { return cfg_.base_width << i; };

  enc_conv_ = register_module("enc_conv", nn::ModuleList());
  enc_attn_ = register_module("enc_attn", nn::ModuleList());
  down_ = register_module("down", nn::ModuleList());
  for (int64_t i = 0; i < n; ++i) {
    const int64_t in = i == 0 ? cfg_.in_channels : 8 * width(i - 1);
    enc_conv_->push_back(ConvBlock3d(in, width(i)));
    if (cfg_.attention_on) enc_attn_->push_back(MultiScaleAttention3d(width(i), cfg_.attention_groups));
    if (cfg_.wavelet_on) {
      down_->push_back(WaveletDown3d());
    } else {
      down_->push_back(nn::Conv3d(nn::Conv3dOptions(width(i), 8 * width(i), 2).stride(2)));
    }
  }

  dec_conv_ = register_module("dec_conv", nn::ModuleList());
  dec_attn_ = register_module("dec_attn", nn::ModuleList());
  dec_proj_ = register_module("dec_proj", nn::ModuleList());
  up_ = register_module("up", nn::ModuleList());
  for (int64_t i = n - 1; i >= 0; --i) {
    const int64_t in = i == n - 1 ? 8 * width(i) : 2 * width(i + 1);
    const int64_t mid = 2 * width(i);
    dec_conv_->push_back(ConvBlock3d(in, mid));
    if (cfg_.attention_on) dec_attn_->push_back(MultiScaleAttention3d(mid, cfg_.attention_groups));
    dec_proj_->push_back(nn::Conv3d(nn::Conv3dOptions(mid, 8 * width(i), 1)));
    if (cfg_.wavelet_on) {
      up_->push_back(WaveletUp3d());
    } else {
      up_->push_back(nn::ConvTranspose3d(nn::ConvTranspose3dOptions(8 * width(i), width(i), 2).stride(2)));
    }
  }

  final_ = register_module("final", ConvBlock3d(2 * width(0), width(0)));
  head_ = register_module("head", nn::Conv3d(nn::Conv3dOptions(width(0), cfg_.out_channels, 1)));
}

torch::Tensor WaveletAttentionGenerator::forward(const torch::Tensor& x) {
  cfg_.check_input(spatial_dims(x));
  const auto n = static_cast<size_t>(cfg_.n_stages);

  std::vector<torch::Tensor> skips;
  torch::Tensor h = x;
  for (size_t i = 0; i < n; ++i) {
    h = enc_conv_[i]->as<ConvBlock3dImpl>()->forward(h);
    if (cfg_.attention_on) h = enc_attn_[i]->as<MultiScaleAttention3dImpl>()->forward(h);
    skips.push_back(h);
    h = down_->ptr(i)->as<WaveletDown3dImpl>() ? down_[i]->as<WaveletDown3dImpl>()->forward(h)
                                                : down_[i]->as<nn::Conv3dImpl>()->forward(h);
  }
  for (size_t j = 0; j < n; ++j) {
    const size_t level = n - 1 - j;
    h = dec_conv_[j]->as<ConvBlock3dImpl>()->forward(h);
    if (cfg_.attention_on) h = dec_attn_[j]->as<MultiScaleAttention3dImpl>()->forward(h);
    h = dec_proj_[j]->as<nn::Conv3dImpl>()->forward(h);
    h = up_->ptr(j)->as<WaveletUp3dImpl>() ? up_[j]->as<WaveletUp3dImpl>()->forward(h)
                                           : up_[j]->as<nn::ConvTranspose3dImpl>()->forward(h);
    h = torch::cat({h, skips[level]}, 1);
  }
  h = final_->forward(h);
  return torch::tanh(head_->forward(h));
}

ResUNetGenerator::ResUNetGenerator(GeneratorConfig cfg) : GeneratorNet(cfg) {
  cfg_.attention_on = false;
  cfg_.wavelet_on = false;
  cfg_.validate();
  const int64_t n = cfg_.n_stages;
  auto width = [&](int64_t i) { return cfg_.base_width << i; };

  stem_ = register_module(
      "stem", nn::Sequential(nn::Conv3d(nn::Conv3dOptions(cfg_.in_channels, width(0), 3).padding(1).bias(false)),
                             nn::InstanceNorm3d(nn::InstanceNorm3dOptions(width(0)).affine(true)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  enc_res_ = register_module("enc_res", nn::ModuleList());
  down_ = register_module("down", nn::ModuleList());
  for (int64_t i = 0; i < n; ++i) {
    enc_res_->push_back(ResBlock3d(width(i)));
    down_->push_back(nn::Sequential(
        nn::Conv3d(nn::Conv3dOptions(width(i), width(i + 1), 2).stride(2).bias(false)),
        nn::InstanceNorm3d(nn::InstanceNorm3dOptions(width(i + 1)).affine(true)),
        nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  }
  bottleneck_ = register_module("bottleneck", ResBlock3d(width(n)));

  up_ = register_module("up", nn::ModuleList());
  fuse_ = register_module("fuse", nn::ModuleList());
  dec_res_ = register_module("dec_res", nn::ModuleList());
  for (int64_t i = n - 1; i >= 0; --i) {
    up_->push_back(nn::Sequential(
        nn::ConvTranspose3d(nn::ConvTranspose3dOptions(width(i + 1), width(i), 2).stride(2).bias(false)),
        nn::InstanceNorm3d(nn::InstanceNorm3dOptions(width(i)).affine(true)),
        nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    fuse_->push_back(nn::Sequential(
        nn::Conv3d(nn::Conv3dOptions(2 * width(i), width(i), 1).bias(false)),
        nn::InstanceNorm3d(nn::InstanceNorm3dOptions(width(i)).affine(true)),
        nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    dec_res_->push_back(ResBlock3d(width(i)));
  }
  head_ = register_module("head", nn::Conv3d(nn::Conv3dOptions(width(0), cfg_.out_channels, 1)));
}

torch::Tensor ResUNetGenerator::forward(const torch::Tensor& x) {
  cfg_.check_input(spatial_dims(x));
  const auto n = static_cast<size_t>(cfg_.n_stages);

  std::vector<torch::Tensor> skips;
  torch::Tensor h = stem_->forward(x);
  for (size_t i = 0; i < n; ++i) {
    h = enc_res_[i]->as<ResBlock3dImpl>()->forward(h);
    skips.push_back(h);
    h = down_[i]->as<nn::SequentialImpl>()->forward(h);
  }
  h = bottleneck_->forward(h);
  for (size_t j = 0; j < n; ++j) {
    h = up_[j]->as<nn::SequentialImpl>()->forward(h);
    h = fuse_[j]->as<nn::SequentialImpl>()->forward(torch::cat({h, skips[n - 1 - j]}, 1));
    h = dec_res_[j]->as<ResBlock3dImpl>()->forward(h);
  }
  return torch::tanh(head_->forward(h));
}

std::shared_ptr<GeneratorNet> make_generator(const GeneratorConfig& cfg, uint64_t seed) {
  std::shared_ptr<GeneratorNet> net;
  if (cfg.direction == Direction::OctToOcta) {
    net = std::make_shared<WaveletAttentionGenerator>(cfg);
  } else {
    net = std::make_shared<ResUNetGenerator>(cfg);
  }
  init_weights(*net, seed);
  return net;
}

std::vector<ManifestRow> module_manifest(const nn::Module& root) {
  std::vector<ManifestRow> rows;
  for (const auto& item : root.named_modules("", /*include_self=*/false)) {
    const nn::Module& m = *item.value();
    const std::string type = module_type_label(m);
    if (type == "ModuleList" || type == "Sequential") continue;
    ManifestRow row{item.key(), type, {}, 0};
    for (const auto& p : m.named_parameters(/*recurse=*/false)) {
      row.shapes.push_back(p.value().sizes().vec());
      row.count += p.value().numel();
    }
    // Composite blocks report their own parameters only through their children.
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ManifestRow> gen_param_summary(const GeneratorConfig& cfg) {
  torch::NoGradGuard no_grad;
  auto net = make_generator(cfg, 0);
  return module_manifest(*net);
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  int64_t total = 0;
  for (const auto& r : rows) {
    out << r.layer << '\t' << r.type << '\t';
    if (r.shapes.empty()) out << '-';
    for (size_t i = 0; i < r.shapes.size(); ++i) {
      if (i) out << ',';
      out << '[';
      for (size_t k = 0; k < r.shapes[i].size(); ++k) out << (k ? "x" : "") << r.shapes[i][k];
      out << ']';
    }
    out << '\t' << r.count << '\n';
    total += r.count;
  }
  out << "total\t\t\t" << total << '\n';
  return out.str();
}

}  // namespace pupinet
