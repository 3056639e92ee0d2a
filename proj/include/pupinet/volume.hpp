#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

#include "pupinet/errors.hpp"

namespace pupinet {

// Volume extents in (depth, height, width) order. Depth is the z / A-scan axis.
struct Dims3 {
  int64_t d = 0;
  int64_t h = 0;
  int64_t w = 0;

  int64_t count() const { return d * h * w; }
  bool operator==(const Dims3&) const = default;
  std::string str() const {
    return std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const ValueRange&) const = default;
};

// Dense scalar field stored row-major in (d, h, w) order.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Dims3 dims, T fill = T(0), ValueRange range = {})
      : dims_(checked(dims)), data_(static_cast<size_t>(dims.count()), fill), range_(range) {}
  Volume(Dims3 dims, std::vector<T> data, ValueRange range = {})
      : dims_(checked(dims)), data_(std::move(data)), range_(range) {
    if (static_cast<int64_t>(data_.size()) != dims_.count()) {
      throw ShapeError("volume payload has " + std::to_string(data_.size()) +
                       " values, dims " + dims_.str() + " need " +
                       std::to_string(dims_.count()));
    }
  }

  const Dims3& dims() const { return dims_; }
  ValueRange value_range() const { return range_; }
  void set_value_range(ValueRange r) { range_ = r; }

  size_t index(int64_t d, int64_t h, int64_t w) const {
    return static_cast<size_t>((d * dims_.h + h) * dims_.w + w);
  }
  T& at(int64_t d, int64_t h, int64_t w) { return data_[index(d, h, w)]; }
  T at(int64_t d, int64_t h, int64_t w) const { return data_[index(d, h, w)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  bool empty() const { return data_.empty(); }

  std::pair<T, T> min_max() const {
    auto [lo, hi] = std::minmax_element(data_.begin(), data_.end());
    return {*lo, *hi};
  }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Volume<U> cast() const {
    return Volume<U>(dims_, std::vector<U>(data_.begin(), data_.end()), range_);
  }

  bool operator==(const Volume&) const = default;

 private:
  static Dims3 checked(Dims3 dims) {
    if (dims.d < 1 || dims.h < 1 || dims.w < 1) {
      throw ShapeError("volume dims must be positive, got " + dims.str());
    }
    return dims;
  }

  Dims3 dims_;
  std::vector<T> data_;
  ValueRange range_;
};

using Volume3D = Volume<float>;
using Volume3Dd = Volume<double>;

// En-face image, (h, w) row-major. Always accumulated in double.
class Projection2D {
 public:
  Projection2D() = default;
  Projection2D(int64_t h, int64_t w, double fill = 0.0)
      : h_(h), w_(w), data_(static_cast<size_t>(h * w), fill) {
    if (h < 1 || w < 1) throw ShapeError("projection dims must be positive");
  }
  Projection2D(int64_t h, int64_t w, std::vector<double> data)
      : h_(h), w_(w), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != h * w) {
      throw ShapeError("projection payload does not match dims");
    }
  }

  int64_t height() const { return h_; }
  int64_t width() const { return w_; }
  double& at(int64_t h, int64_t w) { return data_[static_cast<size_t>(h * w_ + w)]; }
  double at(int64_t h, int64_t w) const { return data_[static_cast<size_t>(h * w_ + w)]; }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Projection2D&) const = default;

 private:
  int64_t h_ = 0;
  int64_t w_ = 0;
  std::vector<double> data_;
};

// Retinal surfaces as constant-z planes; slabs are half-open [ilm, opl) and [opl, bm).
struct LayerBoundaries {
  int64_t ilm_z = 0;
  int64_t opl_z = 0;
  int64_t bm_z = 0;

  void validate(int64_t depth) const {
    if (!(0 <= ilm_z && ilm_z < opl_z && opl_z < bm_z && bm_z <= depth)) {
      throw ShapeError("layer boundaries must satisfy 0 <= ilm < opl < bm <= D");
    }
  }
  bool operator==(const LayerBoundaries&) const = default;
};

// Mean over the half-open depth slab [z_lo, z_hi).
template <typename T>
Projection2D project_mean_z(const Volume<T>& v, int64_t z_lo, int64_t z_hi) {
  const Dims3& n = v.dims();
  if (z_lo < 0 || z_hi > n.d || z_lo >= z_hi) {
    throw ShapeError("projection slab [" + std::to_string(z_lo) + ", " + std::to_string(z_hi) +
                     ") is empty or outside depth " + std::to_string(n.d));
  }
  Projection2D out(n.h, n.w);
  const auto data = v.data();
  const size_t plane = static_cast<size_t>(n.h * n.w);
  for (int64_t d = z_lo; d < z_hi; ++d) {
    const T* src = data.data() + static_cast<size_t>(d) * plane;
    for (size_t i = 0; i < plane; ++i) out.data()[i] += static_cast<double>(src[i]);
  }
  const double inv = 1.0 / static_cast<double>(z_hi - z_lo);
  for (double& x : out.data()) x *= inv;
  return out;
}

template <typename T>
Projection2D project_mean_z(const Volume<T>& v) {
  return project_mean_z(v, 0, v.dims().d);
}

// Affine map of [min, max] onto target; min lands on target.lo and max on target.hi exactly.
template <typename T>
Volume<T> normalize(const Volume<T>& v, ValueRange target = {}) {
  auto [lo, hi] = v.min_max();
  if (!(hi > lo)) throw ShapeError("cannot normalize a constant volume");
  const double scale = (target.hi - target.lo) / (static_cast<double>(hi) - lo);
  std::vector<T> out(v.data().size());
  const auto src = v.data();
  for (size_t i = 0; i < out.size(); ++i) {
    if (src[i] == lo) {
      out[i] = static_cast<T>(target.lo);
    } else if (src[i] == hi) {
      out[i] = static_cast<T>(target.hi);
    } else {
      double mapped = target.lo + (static_cast<double>(src[i]) - lo) * scale;
      out[i] = static_cast<T>(std::clamp(mapped, target.lo, target.hi));
    }
  }
  return Volume<T>(v.dims(), std::move(out), target);
}

// Tensor bridges. Volumes become {1, 1, D, H, W}; projections become {1, 1, H, W}.
torch::Tensor to_tensor(const Volume3D& v);
torch::Tensor to_tensor(const Volume3Dd& v);
torch::Tensor to_tensor(const Projection2D& p, torch::Dtype dtype = torch::kFloat32);
Volume3D volume_from_tensor(const torch::Tensor& t, ValueRange range = {});
Projection2D projection_from_tensor(const torch::Tensor& t);

// Differentiable mean over [z_lo, z_hi) along the depth axis (dim -3) of a
// (..., D, H, W) tensor. Returns (..., H, W).
torch::Tensor project_mean_z(const torch::Tensor& v, int64_t z_lo, int64_t z_hi);
torch::Tensor project_mean_z(const torch::Tensor& v);

}  // namespace pupinet
