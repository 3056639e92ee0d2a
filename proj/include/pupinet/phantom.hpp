#pragma once

#include <cstdint>

#include "pupinet/volume.hpp"

namespace pupinet {

// Synthetic paired OCT/OCTA volume with known vessel footprint and layer planes.
struct PhantomPair {
  Volume3D oct;
  Volume3D octa;
  Projection2D vessel_mask;  // 0/1 en-face footprint of the vessel tubes
  LayerBoundaries boundaries;
  uint64_t seed = 0;
};

struct PhantomOptions {
  double vessel_radius_min = 1.0;
  double vessel_radius_max = 1.8;
  double octa_vessel_gain = 0.85;
  double oct_vessel_gain = 0.35;
  double oct_speckle = 0.06;
  double octa_noise = 0.02;
};

inline constexpr Dims3 kDeskDims{32, 64, 64};
inline constexpr int kDefaultVessels = 6;

// Layer planes at fixed depth fractions. Throws ShapeError if any dim < 8.
LayerBoundaries phantom_boundaries(Dims3 dims);

// Deterministic in (seed, dims, n_vessels, options). Both volumes end up on [0, 1].
PhantomPair generate_phantom_pair(uint64_t seed, Dims3 dims = kDeskDims,
                                  int n_vessels = kDefaultVessels,
                                  const PhantomOptions& options = {});

}  // namespace pupinet
