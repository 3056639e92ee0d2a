#include "pupinet/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <torch/torch.h>

#include "pupinet/errors.hpp"
#include "pupinet/volume.hpp"

namespace pupinet {

void LossWeights::validate() const {
  for (double v : {lambda_A, lambda_B, lambda_C, lambda_A_prime}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
  }
}

torch::Tensor l1_3d(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw ShapeError("l1_3d operands differ in shape");
  return (a - b).abs().mean();
}

torch::Tensor tv3d(const torch::Tensor& v, TvReduction reduction) {
  if (v.dim() < 3) throw ShapeError("tv3d needs (..., D, H, W)");
  const int64_t nd = v.dim();
  auto total = torch::zeros({}, v.options());
  for (int64_t axis = nd - 3; axis < nd; ++axis) {
    const int64_t n = v.size(axis);
    if (n < 2) continue;
    total = total + (v.narrow(axis, 1, n - 1) - v.narrow(axis, 0, n - 1)).abs().sum();
  }
  if (reduction == TvReduction::Mean) total = total / static_cast<double>(v.numel());
  return total;
}

torch::Tensor proj_loss(const torch::Tensor& real, const torch::Tensor& fake) {
  if (real.sizes() != fake.sizes()) throw ShapeError("proj_loss operands differ in shape");
  return l1_3d(project_mean_z(real), project_mean_z(fake));
}

AdversarialLosses adv_losses(const torch::Tensor& real, const torch::Tensor& fake) {
  auto d = torch::softplus(-real).mean() + torch::softplus(fake).mean();
  return {adv_g_loss(fake), d};
}

torch::Tensor adv_g_loss(const torch::Tensor& fake) { return torch::softplus(-fake).mean(); }

void LossReport::set(const std::string& name, double value) {
  for (auto& [k, v] : terms) {
    if (k == name) {
      v = value;
      return;
    }
  }
  terms.emplace_back(name, value);
}

bool LossReport::has(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.first == name) return true;
  }
  return false;
}

double LossReport::get(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.first == name) return t.second;
  }
  throw std::out_of_range("no loss term '" + name + "'");
}

std::string LossReport::first_non_finite() const {
  for (const auto& t : terms) {
    if (!std::isfinite(t.second)) return t.first;
  }
  return {};
}

std::string LossReport::csv_rows() const {
  std::string out;
  char buf[64];
  for (const auto& [name, value] : terms) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out += std::to_string(step) + "," + name + "," + buf + "\n";
  }
  return out;
}

}  // namespace pupinet
