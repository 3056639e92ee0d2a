#include "pupinet/supervisors.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <torch/torch.h>

#include "pupinet/archive.hpp"
#include "pupinet/layers.hpp"
#include "pupinet/losses.hpp"
#include "pupinet/wavelet.hpp"

namespace pupinet {

namespace nn = torch::nn;

namespace {

void append_conv2d_block(nn::Sequential& s, int64_t in, int64_t out) {
  s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1).bias(false)));
  s->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
  s->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
}

nn::Sequential double_conv2d(int64_t in, int64_t out) {
  nn::Sequential s;
  append_conv2d_block(s, in, out);
  append_conv2d_block(s, out, out);
  return s;
}

constexpr double kSupervisorInitStd = 0.1;

}  // namespace

VsmNetImpl::VsmNetImpl(Dims3 d, int64_t w) : dims(d) {
  stem = register_module(
      "stem", nn::Sequential(nn::Conv3d(nn::Conv3dOptions(1, w, 3).padding(1)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
                             nn::Conv3d(nn::Conv3dOptions(w, w, 3).padding(1)),
                             nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  depth_score = register_module("depth_score", nn::Conv3d(nn::Conv3dOptions(w, 1, 1)));
  nn::Sequential h = double_conv2d(w, 2 * w);
  h->push_back(nn::Conv2d(nn::Conv2dOptions(2 * w, 1, 1)));
  head = register_module("head", h);
}

torch::Tensor VsmNetImpl::logits(const torch::Tensor& octa) {
  if (octa.dim() != 5 || octa.size(1) != 1 || octa.size(2) != dims.d || octa.size(3) != dims.h ||
      octa.size(4) != dims.w) {
    throw ShapeError("VSM configured for (N, 1, " + dims.str() + ") input");
  }
  auto features = stem->forward(octa);
  auto weights = torch::softmax(depth_score->forward(features), 2);
  auto pooled = (features * weights).sum(2);
  return head->forward(pooled);
}

torch::Tensor VsmNetImpl::forward(const torch::Tensor& octa) { return torch::sigmoid(logits(octa)); }

HfcNetImpl::HfcNetImpl(int64_t h, int64_t w, int64_t base) : height(h), width(w) {
  if (h % 4 || w % 4) throw ShapeError("HFC projection dims must be divisible by 4");
  enc0 = register_module("enc0", double_conv2d(1, base));
  enc1 = register_module("enc1", double_conv2d(4 * base, 2 * base));
  bottleneck = register_module("bottleneck", double_conv2d(8 * base, 4 * base));
  proj1 = register_module("proj1", nn::Conv2d(nn::Conv2dOptions(4 * base, 8 * base, 1)));
  dec1 = register_module("dec1", double_conv2d(4 * base, 2 * base));
  proj0 = register_module("proj0", nn::Conv2d(nn::Conv2dOptions(2 * base, 4 * base, 1)));
  dec0 = register_module("dec0", double_conv2d(2 * base, base));
  out = register_module("out", nn::Conv2d(nn::Conv2dOptions(base, 1, 1)));
}

torch::Tensor HfcNetImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != height || x.size(3) != width) {
    throw ShapeError("HFC configured for (N, 1, " + std::to_string(height) + ", " +
                     std::to_string(width) + ") input");
  }
  auto s0 = enc0->forward(x);
  auto s1 = enc1->forward(haar_dwt2(s0));
  auto b = bottleneck->forward(haar_dwt2(s1));
  auto u1 = dec1->forward(torch::cat({haar_idwt2(proj1->forward(b)), s1}, 1));
  auto u0 = dec0->forward(torch::cat({haar_idwt2(proj0->forward(u1)), s0}, 1));
  return x + out->forward(u0);
}

Projection2D vsm_forward(VsmNet& net, const Volume3D& octa) {
  torch::NoGradGuard no_grad;
  return projection_from_tensor(net->forward(to_tensor(octa)));
}

Projection2D hfc_forward(HfcNet& net, const Projection2D& proj) {
  torch::NoGradGuard no_grad;
  return projection_from_tensor(net->forward(to_tensor(proj)));
}

torch::Tensor vsm_loss(const FrozenVsm& vsm, const torch::Tensor& fake, const torch::Tensor& real) {
  if (!vsm.flag.frozen) throw std::logic_error("vsm_loss requires a frozen VSM");
  if (fake.sizes() != real.sizes()) throw ShapeError("vsm_loss operands differ in shape");
  auto net = vsm.net;
  torch::Tensor target;
  {
    torch::NoGradGuard no_grad;
    target = net->forward(real);
  }
  return l1_3d(net->forward(fake), target);
}

torch::Tensor layer_proj_loss(const HfcNet& hfc, const FrozenFlag& flag, const torch::Tensor& real,
                              const torch::Tensor& fake) {
  if (!flag.frozen) throw std::logic_error("layer_proj_loss requires a frozen HFC net");
  if (fake.sizes() != real.sizes()) throw ShapeError("layer_proj_loss operands differ in shape");
  auto net = hfc;
  torch::Tensor target;
  {
    torch::NoGradGuard no_grad;
    target = net->forward(project_mean_z(real));
  }
  return l1_3d(net->forward(project_mean_z(fake)), target);
}

double dice(const Projection2D& prob, const Projection2D& mask, double threshold) {
  if (prob.height() != mask.height() || prob.width() != mask.width()) {
    throw ShapeError("dice operands differ in shape");
  }
  double inter = 0.0, a = 0.0, b = 0.0;
  for (size_t i = 0; i < prob.data().size(); ++i) {
    const double p = prob.data()[i] >= threshold ? 1.0 : 0.0;
    const double m = mask.data()[i] >= 0.5 ? 1.0 : 0.0;
    inter += p * m;
    a += p;
    b += m;
  }
  if (a + b == 0.0) return 1.0;
  return 2.0 * inter / (a + b);
}

namespace {

std::vector<size_t> epoch_order(size_t n, std::mt19937_64& rng) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void require_uniform_dims(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("supervisor pretraining needs a non-empty dataset");
  for (const auto& p : data) {
    if (!(p.octa.dims() == data.front().octa.dims())) {
      throw ShapeError("supervisor pretraining needs uniform volume dims");
    }
  }
}

}  // namespace

VsmTrainResult pretrain_vsm(const Dataset& data, int epochs, uint64_t seed,
                            const SupervisorTrainOptions& opt) {
  require_uniform_dims(data);
  const Dims3 dims = data.front().octa.dims();
  VsmNet net(dims, opt.width > 0 ? opt.width : 8);
  init_weights(*net, seed, kSupervisorInitStd);

  std::vector<torch::Tensor> inputs, masks;
  for (const auto& p : data) {
    inputs.push_back(to_tensor(p.octa));
    masks.push_back(to_tensor(p.vessel_mask));
  }

  torch::optim::Adam optim(net->parameters(), torch::optim::AdamOptions(opt.learning_rate));
  std::mt19937_64 rng(seed);
  VsmTrainResult result;
  net->train();
  for (int e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (size_t i : epoch_order(data.size(), rng)) {
      optim.zero_grad();
      auto logit = net->logits(inputs[i]);
      auto prob = torch::sigmoid(logit);
      auto bce = torch::binary_cross_entropy_with_logits(logit, masks[i]);
      auto soft_dice = 1.0 - (2.0 * (prob * masks[i]).sum() + 1.0) / (prob.sum() + masks[i].sum() + 1.0);
      auto loss = bce + soft_dice;
      loss.backward();
      optim.step();
      sum += loss.item<double>();
    }
    result.epoch_loss.push_back(sum / static_cast<double>(data.size()));
  }
  result.vsm.flag = freeze(*net);
  result.vsm.net = net;
  return result;
}

HfcTrainResult pretrain_hfc(const Dataset& data, int epochs, uint64_t seed,
                            const SupervisorTrainOptions& opt) {
  require_uniform_dims(data);
  const Dims3 dims = data.front().octa.dims();
  const LayerBoundaries bounds = data.front().boundaries;
  const int64_t width = opt.width > 0 ? opt.width : 16;
  HfcNet ilm_opl(dims.h, dims.w, width), opl_bm(dims.h, dims.w, width);
  init_weights(*ilm_opl, seed, kSupervisorInitStd);
  init_weights(*opl_bm, seed + 1, kSupervisorInitStd);

  std::vector<torch::Tensor> full, slab_a, slab_b;
  for (const auto& p : data) {
    p.boundaries.validate(dims.d);
    full.push_back(to_tensor(project_mean_z(p.octa)));
    slab_a.push_back(to_tensor(project_mean_z(p.octa, p.boundaries.ilm_z, p.boundaries.opl_z)));
    slab_b.push_back(to_tensor(project_mean_z(p.octa, p.boundaries.opl_z, p.boundaries.bm_z)));
  }

  auto fit = [&](HfcNet& net, const std::vector<torch::Tensor>& targets, uint64_t stream) {
    torch::optim::Adam optim(net->parameters(), torch::optim::AdamOptions(opt.learning_rate));
    std::mt19937_64 rng(stream);
    std::vector<double> losses;
    net->train();
    for (int e = 0; e < epochs; ++e) {
      double sum = 0.0;
      for (size_t i : epoch_order(data.size(), rng)) {
        optim.zero_grad();
        auto loss = l1_3d(net->forward(full[i]), targets[i]);
        loss.backward();
        optim.step();
        sum += loss.item<double>();
      }
      losses.push_back(sum / static_cast<double>(data.size()));
    }
    return losses;
  };

  HfcTrainResult result;
  result.ilm_opl_loss = fit(ilm_opl, slab_a, seed);
  result.opl_bm_loss = fit(opl_bm, slab_b, seed + 1);
  result.hfc.ilm_opl_flag = freeze(*ilm_opl);
  result.hfc.opl_bm_flag = freeze(*opl_bm);
  result.hfc.ilm_opl = ilm_opl;
  result.hfc.opl_bm = opl_bm;
  result.hfc.boundaries = bounds;
  return result;
}

void save_vsm(const FrozenVsm& vsm, const std::filesystem::path& path) {
  if (!vsm.flag.frozen) throw std::logic_error("only frozen supervisors can be saved");
  Archive a;
  const Dims3& d = vsm.net->dims;
  a.manifest = {{"kind", "vsm"},
                {"dims", {d.d, d.h, d.w}},
                {"width", vsm.net->depth_score->options.in_channels()},
                {"digest", vsm.flag.digest}};
  put_module(a, "vsm", *vsm.net);
  write_archive(a, path);
}

FrozenVsm load_vsm(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const auto& m = a.manifest;
  if (m.value("kind", "") != "vsm") throw TrainingAbort(path.string() + " is not a VSM archive");
  if (!m.contains("digest") || !m["digest"].is_string()) {
    throw TrainingAbort("VSM archive " + path.string() + " carries no freeze digest");
  }
  const Dims3 dims{m["dims"][0].get<int64_t>(), m["dims"][1].get<int64_t>(), m["dims"][2].get<int64_t>()};
  VsmNet net(dims, m["width"].get<int64_t>());
  load_module(a, "vsm", *net);
  FrozenVsm out{net, freeze(*net)};
  if (out.flag.digest != m["digest"].get<std::string>()) {
    throw TrainingAbort("VSM parameters in " + path.string() + " do not match their freeze digest");
  }
  return out;
}

void save_hfc(const FrozenHfc& hfc, const std::filesystem::path& path) {
  if (!hfc.ilm_opl_flag.frozen || !hfc.opl_bm_flag.frozen) {
    throw std::logic_error("only frozen supervisors can be saved");
  }
  Archive a;
  const auto& b = hfc.boundaries;
  a.manifest = {{"kind", "hfc"},
                {"height", hfc.ilm_opl->height},
                {"width", hfc.ilm_opl->width},
                {"base_width", hfc.ilm_opl->out->options.in_channels()},
                {"boundaries", {b.ilm_z, b.opl_z, b.bm_z}},
                {"digest", {{"ilm_opl", hfc.ilm_opl_flag.digest}, {"opl_bm", hfc.opl_bm_flag.digest}}}};
  put_module(a, "ilm_opl", *hfc.ilm_opl);
  put_module(a, "opl_bm", *hfc.opl_bm);
  write_archive(a, path);
}

FrozenHfc load_hfc(const std::filesystem::path& path) {
  const Archive a = read_archive(path);
  const auto& m = a.manifest;
  if (m.value("kind", "") != "hfc") throw TrainingAbort(path.string() + " is not an HFC archive");
  if (!m.contains("digest") || !m["digest"].contains("ilm_opl") || !m["digest"].contains("opl_bm")) {
    throw TrainingAbort("HFC archive " + path.string() + " carries no freeze digests");
  }
  const int64_t h = m["height"].get<int64_t>();
  const int64_t w = m["width"].get<int64_t>();
  const int64_t base = m["base_width"].get<int64_t>();
  FrozenHfc out;
  out.ilm_opl = HfcNet(h, w, base);
  out.opl_bm = HfcNet(h, w, base);
  load_module(a, "ilm_opl", *out.ilm_opl);
  load_module(a, "opl_bm", *out.opl_bm);
  out.ilm_opl_flag = freeze(*out.ilm_opl);
  out.opl_bm_flag = freeze(*out.opl_bm);
  out.boundaries = {m["boundaries"][0].get<int64_t>(), m["boundaries"][1].get<int64_t>(),
                    m["boundaries"][2].get<int64_t>()};
  if (out.ilm_opl_flag.digest != m["digest"]["ilm_opl"].get<std::string>() ||
      out.opl_bm_flag.digest != m["digest"]["opl_bm"].get<std::string>()) {
    throw TrainingAbort("HFC parameters in " + path.string() + " do not match their freeze digests");
  }
  return out;
}

}  // namespace pupinet
