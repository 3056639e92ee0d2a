#pragma once

#include <array>
#include <string>

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>

#include "pupinet/volume.hpp"

namespace pupinet {

// Single-level orthonormal Haar transforms. Analysis filters are
// (1/sqrt2, 1/sqrt2) and (1/sqrt2, -1/sqrt2) along every axis, so the
// transforms preserve energy and invert exactly (up to rounding).
//
// Subband k carries bit 2 for the depth axis, bit 1 for height and bit 0 for
// width (0 = low-pass, 1 = high-pass): k = 0 is LLL, k = 7 is HHH.
//
// Tensor layout for the feature-space versions is subband-major:
//   haar_dwt3: (N, C, D, H, W)    -> (N, 8*C, D/2, H/2, W/2), channel = k*C + c
//   haar_dwt2: (N, C, H, W)       -> (N, 4*C, H/2, W/2),      channel = k*C + c
// All are differentiable.
torch::Tensor haar_dwt3(const torch::Tensor& x);
torch::Tensor haar_idwt3(const torch::Tensor& subbands);
torch::Tensor haar_dwt2(const torch::Tensor& x);
torch::Tensor haar_idwt2(const torch::Tensor& subbands);

std::string subband_label(int k, int ndim = 3);

template <typename T>
struct SubbandSet3D {
  std::array<Volume<T>, 8> bands;
};

SubbandSet3D<float> dwt3(const Volume3D& v);
SubbandSet3D<double> dwt3(const Volume3Dd& v);
Volume3D idwt3(const SubbandSet3D<float>& s);
Volume3Dd idwt3(const SubbandSet3D<double>& s);

// Parameter-free resampling layers so the transforms appear in module listings.
struct WaveletDown3dImpl : torch::nn::Module {
  torch::Tensor forward(const torch::Tensor& x) { return haar_dwt3(x); }
};
TORCH_MODULE(WaveletDown3d);

struct WaveletUp3dImpl : torch::nn::Module {
  torch::Tensor forward(const torch::Tensor& x) { return haar_idwt3(x); }
};
TORCH_MODULE(WaveletUp3d);

struct WaveletDown2dImpl : torch::nn::Module {
  torch::Tensor forward(const torch::Tensor& x) { return haar_dwt2(x); }
};
TORCH_MODULE(WaveletDown2d);

struct WaveletUp2dImpl : torch::nn::Module {
  torch::Tensor forward(const torch::Tensor& x) { return haar_idwt2(x); }
};
TORCH_MODULE(WaveletUp2d);

}  // namespace pupinet
