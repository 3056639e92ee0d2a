#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <torch/types.h>

namespace pupinet {

// Adaptive discriminator augmentation controller.
struct AdaState {
  double p = 0.0;            // augmentation probability, kept in [0, 1]
  double target_rt = 0.6;    // target for the overfitting estimate
  double step_size = 0.01;
  int64_t interval = 4;      // discriminator steps between updates
  double ema_rt = 0.6;       // starts neutral (at target)
  int64_t updates = 0;
};

// ema_rt <- 0.95 ema_rt + 0.05 mean(signs); p moves by step_size towards
// more augmentation when ema_rt > target, less when below, and is clamped to [0, 1].
AdaState ada_update(AdaState s, std::span<const double> d_real_signs);
// Convenience overload taking raw discriminator logits on real pairs.
AdaState ada_update(AdaState s, const torch::Tensor& d_real_logits);

// One sampled transform. Identity fields mean "not applied".
struct AugmentParams {
  bool flip_h = false;
  bool flip_w = false;
  int64_t shift_h = 0;
  int64_t shift_w = 0;
  double scale = 1.0;
  double offset = 0.0;

  bool is_identity() const {
    return !flip_h && !flip_w && shift_h == 0 && shift_w == 0 && scale == 1.0 && offset == 0.0;
  }
};

// Each of the five ops fires independently with probability p. Shifts are
// uniform integers in [-floor(extent/8), floor(extent/8)], the scale is
// log-uniform in [0.8, 1.25] and the offset uniform in [-0.1, 0.1].
AugmentParams sample_augment(double p, int64_t height, int64_t width, std::mt19937_64& rng);

// Applies the same transform to every channel, so condition and candidate of a
// concatenated pair move together. Differentiable; returns `x` itself when the
// transform is the identity.
torch::Tensor apply_augment(const torch::Tensor& x, const AugmentParams& a);

torch::Tensor augment(const torch::Tensor& x, double p, uint64_t seed);

}  // namespace pupinet
