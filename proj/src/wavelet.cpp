#include "pupinet/wavelet.hpp"

#include <cmath>

#include <torch/torch.h>

namespace pupinet {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void require_even(const torch::Tensor& x, int64_t first_axis) {
  for (int64_t a = first_axis; a < x.dim(); ++a) {
    if (x.size(a) % 2 != 0 || x.size(a) == 0) {
      throw ShapeError("Haar transform needs even extents, axis " + std::to_string(a) +
                       " has " + std::to_string(x.size(a)));
    }
  }
}

// Splits x along dim into (low, high) halves.
std::pair<torch::Tensor, torch::Tensor> analyse(const torch::Tensor& x, int64_t dim) {
  auto even = x.slice(dim, 0, x.size(dim), 2);
  auto odd = x.slice(dim, 1, x.size(dim), 2);
  return {(even + odd) * kInvSqrt2, (even - odd) * kInvSqrt2};
}

torch::Tensor synthesise(const torch::Tensor& lo, const torch::Tensor& hi, int64_t dim) {
  auto even = (lo + hi) * kInvSqrt2;
  auto odd = (lo - hi) * kInvSqrt2;
  return torch::stack({even, odd}, dim + 1).flatten(dim, dim + 1);
}

// Recursively analyses axes [axis, last]; appends bands in bit order (first axis = MSB).
void analyse_axes(const torch::Tensor& x, int64_t axis, int64_t last,
                  std::vector<torch::Tensor>& out) {
  if (axis > last) {
    out.push_back(x);
    return;
  }
  auto [lo, hi] = analyse(x, axis);
  analyse_axes(lo, axis + 1, last, out);
  analyse_axes(hi, axis + 1, last, out);
}

torch::Tensor synthesise_axes(const std::vector<torch::Tensor>& bands, size_t begin, size_t end,
                              int64_t axis, int64_t last) {
  if (axis > last) return bands[begin];
  const size_t mid = begin + (end - begin) / 2;
  auto lo = synthesise_axes(bands, begin, mid, axis + 1, last);
  auto hi = synthesise_axes(bands, mid, end, axis + 1, last);
  return synthesise(lo, hi, axis);
}

torch::Tensor dwt_nd(const torch::Tensor& x, int64_t spatial) {
  if (x.dim() != spatial + 2) {
    throw ShapeError("expected an (N, C, spatial...) tensor with " + std::to_string(spatial) +
                     " spatial axes");
  }
  require_even(x, 2);
  std::vector<torch::Tensor> bands;
  analyse_axes(x, 2, 1 + spatial, bands);
  auto stacked = torch::stack(bands, 1);  // (N, K, C, ...)
  return stacked.flatten(1, 2);
}

torch::Tensor idwt_nd(const torch::Tensor& s, int64_t spatial) {
  const int64_t k = int64_t{1} << spatial;
  if (s.dim() != spatial + 2) {
    throw ShapeError("expected an (N, K*C, spatial...) tensor with " + std::to_string(spatial) +
                     " spatial axes");
  }
  if (s.size(1) % k != 0 || s.size(1) == 0) {
    throw ShapeError("channel count " + std::to_string(s.size(1)) + " is not divisible into " +
                     std::to_string(k) + " subbands");
  }
  const int64_t c = s.size(1) / k;
  std::vector<int64_t> shape{s.size(0), k, c};
  for (int64_t a = 2; a < s.dim(); ++a) shape.push_back(s.size(a));
  auto grouped = s.reshape(shape);
  std::vector<torch::Tensor> bands;
  for (int64_t i = 0; i < k; ++i) bands.push_back(grouped.select(1, i));
  return synthesise_axes(bands, 0, bands.size(), 2, 1 + spatial);
}

template <typename T>
SubbandSet3D<T> dwt3_impl(const Volume<T>& v) {
  const Dims3& n = v.dims();
  if (n.d % 2 || n.h % 2 || n.w % 2) {
    throw ShapeError("dwt3 needs even dims, got " + n.str());
  }
  auto bands = haar_dwt3(to_tensor(v));
  SubbandSet3D<T> out;
  for (int k = 0; k < 8; ++k) {
    auto b = bands.select(1, k).contiguous();
    const T* p = b.template data_ptr<T>();
    out.bands[static_cast<size_t>(k)] =
        Volume<T>({n.d / 2, n.h / 2, n.w / 2}, std::vector<T>(p, p + b.numel()));
  }
  return out;
}

template <typename T>
Volume<T> idwt3_impl(const SubbandSet3D<T>& s) {
  const Dims3 half = s.bands[0].dims();
  std::vector<torch::Tensor> parts;
  for (const auto& b : s.bands) {
    if (!(b.dims() == half)) throw ShapeError("idwt3 subbands have mismatched dims");
    parts.push_back(to_tensor(b));
  }
  auto vol = haar_idwt3(torch::cat(parts, 1)).contiguous();
  const T* p = vol.template data_ptr<T>();
  return Volume<T>({half.d * 2, half.h * 2, half.w * 2}, std::vector<T>(p, p + vol.numel()));
}

}  // namespace

torch::Tensor haar_dwt3(const torch::Tensor& x) { return dwt_nd(x, 3); }
torch::Tensor haar_idwt3(const torch::Tensor& s) { return idwt_nd(s, 3); }
torch::Tensor haar_dwt2(const torch::Tensor& x) { return dwt_nd(x, 2); }
torch::Tensor haar_idwt2(const torch::Tensor& s) { return idwt_nd(s, 2); }

std::string subband_label(int k, int ndim) {
  std::string label;
  for (int bit = ndim - 1; bit >= 0; --bit) label.push_back((k >> bit) & 1 ? 'H' : 'L');
  return label;
}

SubbandSet3D<float> dwt3(const Volume3D& v) { return dwt3_impl(v); }
SubbandSet3D<double> dwt3(const Volume3Dd& v) { return dwt3_impl(v); }
Volume3D idwt3(const SubbandSet3D<float>& s) { return idwt3_impl(s); }
Volume3Dd idwt3(const SubbandSet3D<double>& s) { return idwt3_impl(s); }

}  // namespace pupinet
