#include "pupinet/volume.hpp"

#include <torch/torch.h>

namespace pupinet {

namespace {

template <typename T>
torch::Tensor volume_tensor(const Volume<T>& v, torch::Dtype dtype) {
  const Dims3& n = v.dims();
  return torch::from_blob(const_cast<T*>(v.data().data()), {1, 1, n.d, n.h, n.w}, dtype).clone();
}

}  // namespace

torch::Tensor to_tensor(const Volume3D& v) { return volume_tensor(v, torch::kFloat32); }

torch::Tensor to_tensor(const Volume3Dd& v) { return volume_tensor(v, torch::kFloat64); }

torch::Tensor to_tensor(const Projection2D& p, torch::Dtype dtype) {
  auto t = torch::from_blob(const_cast<double*>(p.data().data()), {1, 1, p.height(), p.width()},
                            torch::kFloat64)
               .clone();
  return t.to(dtype);
}

Volume3D volume_from_tensor(const torch::Tensor& t, ValueRange range) {
  if (t.dim() < 3) throw ShapeError("volume tensor needs at least 3 dims");
  auto c = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  const int64_t nd = c.dim();
  if (c.numel() != c.size(nd - 3) * c.size(nd - 2) * c.size(nd - 1)) {
    throw ShapeError("volume tensor must hold exactly one volume");
  }
  Dims3 dims{c.size(nd - 3), c.size(nd - 2), c.size(nd - 1)};
  const float* p = c.data_ptr<float>();
  return Volume3D(dims, std::vector<float>(p, p + c.numel()), range);
}

Projection2D projection_from_tensor(const torch::Tensor& t) {
  if (t.dim() < 2) throw ShapeError("projection tensor needs at least 2 dims");
  auto c = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  const int64_t h = c.size(-2);
  const int64_t w = c.size(-1);
  if (c.numel() != h * w) throw ShapeError("projection tensor must hold exactly one image");
  const double* p = c.data_ptr<double>();
  return Projection2D(h, w, std::vector<double>(p, p + c.numel()));
}

torch::Tensor project_mean_z(const torch::Tensor& v, int64_t z_lo, int64_t z_hi) {
  if (v.dim() < 3) throw ShapeError("projection needs a (..., D, H, W) tensor");
  const int64_t depth = v.size(-3);
  if (z_lo < 0 || z_hi > depth || z_lo >= z_hi) {
    throw ShapeError("projection slab is empty or outside the volume depth");
  }
  return v.narrow(-3, z_lo, z_hi - z_lo).mean(-3);
}

torch::Tensor project_mean_z(const torch::Tensor& v) {
  if (v.dim() < 3) throw ShapeError("projection needs a (..., D, H, W) tensor");
  return project_mean_z(v, 0, v.size(-3));
}

}  // namespace pupinet
