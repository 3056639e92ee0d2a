#include "pupinet/phantom.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pupinet {

namespace {

// Reflectivity of a healthy retina along one A-scan, by depth.
double oct_layer_profile(int64_t z, const LayerBoundaries& b) {
  if (z < b.ilm_z) return 0.05;              // vitreous
  if (z < b.ilm_z + 2) return 0.75;          // nerve fibre layer
  if (z < b.opl_z) return 0.55;              // inner retina
  if (z < b.opl_z + 1) return 0.65;          // OPL
  if (z < b.bm_z) return 0.30;               // outer nuclear layer
  if (z < b.bm_z + 2) return 0.90;           // RPE / Bruch's membrane
  return 0.25;                               // choroid
}

struct Tube {
  std::vector<std::array<double, 3>> centre;  // (z, h, w)
  double radius = 1.0;
};

Tube trace_vessel(std::mt19937_64& rng, Dims3 dims, const LayerBoundaries& b,
                  const PhantomOptions& opt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> turn(0.0, 0.08);

  Tube tube;
  tube.radius = opt.vessel_radius_min + (opt.vessel_radius_max - opt.vessel_radius_min) * unit(rng);

  const double z_min = b.ilm_z + 1.0;
  const double z_max = b.bm_z - 1.0;
  const double z_mid = 0.5 * (z_min + z_max);
  const double z_amp = 0.5 * (z_max - z_min) * unit(rng);
  const double z_freq = 2.0 * std::numbers::pi / (dims.w * (0.5 + unit(rng)));
  const double z_phase = 2.0 * std::numbers::pi * unit(rng);

  double h = unit(rng) * (dims.h - 1);
  double w = unit(rng) * (dims.w - 1);
  double heading = 2.0 * std::numbers::pi * unit(rng);
  const double length = (0.6 + 0.6 * unit(rng)) * std::max(dims.h, dims.w);
  const double step = 0.5;

  for (double t = 0.0; t < length; t += step) {
    const double z = std::clamp(z_mid + z_amp * std::sin(z_freq * t + z_phase), z_min, z_max);
    tube.centre.push_back({z, h, w});
    heading += turn(rng);
    h += step * std::sin(heading);
    w += step * std::cos(heading);
    if (h < -tube.radius || h > dims.h - 1 + tube.radius || w < -tube.radius ||
        w > dims.w - 1 + tube.radius) {
      break;
    }
  }
  return tube;
}

// Stamps max(Gaussian cross-section) of a tube into field.
void stamp(const Tube& tube, Volume<double>& field) {
  const Dims3& n = field.dims();
  const double sigma = tube.radius / 1.1774;  // profile reaches 0.5 at the tube radius
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const int64_t reach = static_cast<int64_t>(std::ceil(3.0 * sigma));
  for (const auto& c : tube.centre) {
    const auto cz = static_cast<int64_t>(std::lround(c[0]));
    const auto ch = static_cast<int64_t>(std::lround(c[1]));
    const auto cw = static_cast<int64_t>(std::lround(c[2]));
    for (int64_t z = std::max<int64_t>(0, cz - reach); z <= std::min(n.d - 1, cz + reach); ++z) {
      for (int64_t y = std::max<int64_t>(0, ch - reach); y <= std::min(n.h - 1, ch + reach); ++y) {
        for (int64_t x = std::max<int64_t>(0, cw - reach); x <= std::min(n.w - 1, cw + reach);
             ++x) {
          const double dz = z - c[0], dy = y - c[1], dx = x - c[2];
          const double p = std::exp(-(dz * dz + dy * dy + dx * dx) * inv2s2);
          double& cell = field.at(z, y, x);
          cell = std::max(cell, p);
        }
      }
    }
  }
}

}  // namespace

LayerBoundaries phantom_boundaries(Dims3 dims) {
  if (dims.d < 8 || dims.h < 8 || dims.w < 8) {
    throw ShapeError("phantom dims must each be >= 8, got " + dims.str());
  }
  LayerBoundaries b{static_cast<int64_t>(0.15 * dims.d), static_cast<int64_t>(0.45 * dims.d),
                    static_cast<int64_t>(0.75 * dims.d)};
  b.validate(dims.d);
  return b;
}

PhantomPair generate_phantom_pair(uint64_t seed, Dims3 dims, int n_vessels,
                                  const PhantomOptions& opt) {
  if (n_vessels < 0) throw std::invalid_argument("n_vessels must be >= 0");
  const LayerBoundaries b = phantom_boundaries(dims);

  std::mt19937_64 rng(seed);
  Volume<double> vessels(dims, 0.0);
  for (int i = 0; i < n_vessels; ++i) stamp(trace_vessel(rng, dims, b, opt), vessels);

  // Separate stream so the background noise does not depend on the vessel geometry.
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Volume<double> oct(dims), octa(dims);
  for (int64_t z = 0; z < dims.d; ++z) {
    const bool in_retina = z >= b.ilm_z && z < b.bm_z;
    const double octa_bg = in_retina ? 0.08 : 0.03;
    const double octa_sd = in_retina ? opt.octa_noise : 0.5 * opt.octa_noise;
    const double layer = oct_layer_profile(z, b);
    for (int64_t y = 0; y < dims.h; ++y) {
      for (int64_t x = 0; x < dims.w; ++x) {
        const double v = vessels.at(z, y, x);
        const double speckle = 1.0 + opt.oct_speckle * gauss(noise_rng);
        oct.at(z, y, x) = (layer + opt.oct_vessel_gain * v) * speckle;
        octa.at(z, y, x) = std::max(0.0, octa_bg + octa_sd * gauss(noise_rng)) + opt.octa_vessel_gain * v;
      }
    }
  }

  Projection2D mask(dims.h, dims.w, 0.0);
  for (int64_t y = 0; y < dims.h; ++y) {
    for (int64_t x = 0; x < dims.w; ++x) {
      double peak = 0.0;
      for (int64_t z = 0; z < dims.d; ++z) peak = std::max(peak, vessels.at(z, y, x));
      mask.at(y, x) = peak >= 0.5 ? 1.0 : 0.0;
    }
  }

  PhantomPair pair;
  pair.oct = normalize(oct, {0.0, 1.0}).cast<float>();
  pair.octa = normalize(octa, {0.0, 1.0}).cast<float>();
  pair.vessel_mask = std::move(mask);
  pair.boundaries = b;
  pair.seed = seed;
  return pair;
}

}  // namespace pupinet
