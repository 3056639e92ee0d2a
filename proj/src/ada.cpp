#include "pupinet/ada.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <torch/torch.h>

namespace pupinet {

AdaState ada_update(AdaState s, std::span<const double> signs) {
  if (signs.empty()) return s;
  double mean = 0.0;
  for (double v : signs) mean += v;
  mean /= static_cast<double>(signs.size());

  s.ema_rt = 0.95 * s.ema_rt + 0.05 * mean;
  double direction = 0.0;
  if (s.ema_rt > s.target_rt) direction = 1.0;
  if (s.ema_rt < s.target_rt) direction = -1.0;
  // Repeated float steps drift off the bounds (10 x 0.1 < 1); snap within rounding distance.
  constexpr double kSnap = 1e-9;
  double p = s.p + s.step_size * direction;
  if (p > 1.0 - kSnap) p = 1.0;
  if (p < kSnap) p = 0.0;
  s.p = std::clamp(p, 0.0, 1.0);
  ++s.updates;
  return s;
}

AdaState ada_update(AdaState s, const torch::Tensor& d_real_logits) {
  auto signs = torch::sign(d_real_logits.detach()).to(torch::kFloat64).contiguous().flatten();
  return ada_update(s, std::span<const double>(signs.data_ptr<double>(),
                                               static_cast<size_t>(signs.numel())));
}

AugmentParams sample_augment(double p, int64_t height, int64_t width, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("augmentation probability must be in [0, 1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto fires = [&] { return unit(rng) < p; };
  auto shift = [&](int64_t extent) {
    const int64_t m = extent / 8;
    return std::uniform_int_distribution<int64_t>(-m, m)(rng);
  };

  AugmentParams a;
  a.flip_h = fires();
  a.flip_w = fires();
  if (fires()) {
    a.shift_h = shift(height);
    a.shift_w = shift(width);
  }
  if (fires()) a.scale = std::exp(std::log(0.8) + (std::log(1.25) - std::log(0.8)) * unit(rng));
  if (fires()) a.offset = -0.1 + 0.2 * unit(rng);
  return a;
}

namespace {

// out[i] = x[clamp(i - shift)] along dim: translation with edge replication.
torch::Tensor translate(const torch::Tensor& x, int64_t dim, int64_t shift) {
  if (shift == 0) return x;
  const int64_t n = x.size(dim);
  auto idx = torch::clamp(torch::arange(n, torch::kLong) - shift, 0, n - 1);
  return x.index_select(dim, idx);
}

}  // namespace

torch::Tensor apply_augment(const torch::Tensor& x, const AugmentParams& a) {
  if (x.dim() < 2) throw std::invalid_argument("augmentation needs (..., H, W) input");
  if (a.is_identity()) return x;
  const int64_t dim_h = x.dim() - 2;
  const int64_t dim_w = x.dim() - 1;
  torch::Tensor y = x;
  if (a.flip_h) y = y.flip({dim_h});
  if (a.flip_w) y = y.flip({dim_w});
  y = translate(y, dim_h, a.shift_h);
  y = translate(y, dim_w, a.shift_w);
  if (a.scale != 1.0) y = y * a.scale;
  if (a.offset != 0.0) y = y + a.offset;
  return y;
}

torch::Tensor augment(const torch::Tensor& x, double p, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return apply_augment(x, sample_augment(p, x.size(-2), x.size(-1), rng));
}

}  // namespace pupinet
