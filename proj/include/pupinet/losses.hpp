#pragma once

#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

namespace pupinet {

struct LossWeights {
  double lambda_A = 120.0;        // L1 weight inside the OCT->OCTA GAN term
  double lambda_B = 0.25;         // HFC group weight
  double lambda_C = 5.0;          // VSM weight
  double lambda_A_prime = 15.0;   // L1 weight for OCTA->OCT

  void validate() const;
};

enum class TvReduction { Sum, Mean };

// Mean absolute difference over all elements. Operand shapes must match.
torch::Tensor l1_3d(const torch::Tensor& a, const torch::Tensor& b);

// Anisotropic total variation over the trailing (D, H, W) axes: plain sum of
// absolute forward differences along each axis. Mean divides by numel(v).
torch::Tensor tv3d(const torch::Tensor& v, TvReduction reduction = TvReduction::Sum);

// L1 between full-depth mean projections.
torch::Tensor proj_loss(const torch::Tensor& real, const torch::Tensor& fake);

// Non-saturating logistic losses:
//   d = mean softplus(-real) + mean softplus(fake),  g = mean softplus(-fake).
struct AdversarialLosses {
  torch::Tensor g;
  torch::Tensor d;
};
AdversarialLosses adv_losses(const torch::Tensor& d_real_logits, const torch::Tensor& d_fake_logits);
torch::Tensor adv_g_loss(const torch::Tensor& d_fake_logits);

// (proj + ilm_opl + opl_bm + tv) * lambda_B
template <typename T>
T hfc_total(const T& proj, const T& ilm_opl, const T& opl_bm, const T& tv, const LossWeights& w) {
  return (proj + ilm_opl + opl_bm + tv) * w.lambda_B;
}

// adv_g + lambda_A * l1
template <typename T>
T gan_term(const T& adv_g, const T& l1, const LossWeights& w) {
  return adv_g + l1 * w.lambda_A;
}

// gan + lambda_C * vsm + hfc
template <typename T>
T octa_total(const T& gan, const T& vsm, const T& hfc, const LossWeights& w) {
  return gan + vsm * w.lambda_C + hfc;
}

// adv + lambda_A' * l1
template <typename T>
T oct_total(const T& adv, const T& l1, const LossWeights& w) {
  return adv + l1 * w.lambda_A_prime;
}

// Ordered named scalars for one training step.
struct LossReport {
  long step = 0;
  std::vector<std::pair<std::string, double>> terms;

  void set(const std::string& name, double value);
  bool has(const std::string& name) const;
  double get(const std::string& name) const;
  // First non-finite term, or empty when all are finite.
  std::string first_non_finite() const;
  // "step,term,value" lines, one per term.
  std::string csv_rows() const;
};

}  // namespace pupinet
