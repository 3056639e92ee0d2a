#pragma once

#include <filesystem>

#include "pupinet/volume.hpp"

namespace pupinet {

// `<name>.vol` holds little-endian float32 samples in (d, h, w) row-major
// order; `<name>.json` next to it carries
// {"dims":[D,H,W],"dtype":"f32","value_range":[lo,hi]}.
void save_volume(const Volume3D& v, const std::filesystem::path& vol_path);
Volume3D load_volume(const std::filesystem::path& vol_path);

std::filesystem::path sidecar_path(const std::filesystem::path& vol_path);

}  // namespace pupinet
