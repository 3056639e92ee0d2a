#include "pupinet/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pupinet {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "volume files assume a little-endian host");

fs::path sidecar_path(const fs::path& vol_path) {
  fs::path p = vol_path;
  return p.replace_extension(".json");
}

void save_volume(const Volume3D& v, const fs::path& vol_path) {
  if (v.empty()) throw IoError("refusing to save an empty volume");
  if (!v.all_finite()) throw IoError("refusing to save non-finite values to " + vol_path.string());
  if (vol_path.has_parent_path()) fs::create_directories(vol_path.parent_path());

  std::ofstream out(vol_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + vol_path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(v.data().data()),
            static_cast<std::streamsize>(v.data().size() * sizeof(float)));
  if (!out) throw IoError("short write to " + vol_path.string());

  const Dims3& n = v.dims();
  json meta = {{"dims", {n.d, n.h, n.w}},
               {"dtype", "f32"},
               {"value_range", {v.value_range().lo, v.value_range().hi}}};
  std::ofstream side(sidecar_path(vol_path), std::ios::trunc);
  if (!side) throw IoError("cannot write sidecar for " + vol_path.string());
  side << meta.dump(2) << '\n';
}

Volume3D load_volume(const fs::path& vol_path) {
  const fs::path side = sidecar_path(vol_path);
  if (!fs::exists(vol_path)) throw IoError("missing volume file " + vol_path.string());
  if (!fs::exists(side)) throw IoError("missing sidecar " + side.string());

  json meta;
  try {
    std::ifstream in(side);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed sidecar " + side.string() + ": " + e.what());
  }

  Dims3 dims;
  ValueRange range;
  try {
    if (meta.at("dtype").get<std::string>() != "f32") {
      throw IoError("unsupported dtype in " + side.string());
    }
    const auto& d = meta.at("dims");
    if (!d.is_array() || d.size() != 3) throw IoError("dims must have three entries");
    dims = {d[0].get<int64_t>(), d[1].get<int64_t>(), d[2].get<int64_t>()};
    const auto& r = meta.at("value_range");
    range = {r.at(0).get<double>(), r.at(1).get<double>()};
  } catch (const json::exception& e) {
    throw IoError("invalid sidecar " + side.string() + ": " + e.what());
  }
  if (dims.d < 1 || dims.h < 1 || dims.w < 1) throw IoError("non-positive dims in " + side.string());

  const auto expected = static_cast<uintmax_t>(dims.count()) * sizeof(float);
  const auto actual = fs::file_size(vol_path);
  if (actual != expected) {
    throw IoError("payload size mismatch in " + vol_path.string() + ": header implies " +
                  std::to_string(expected) + " bytes, file has " + std::to_string(actual));
  }

  std::vector<float> data(static_cast<size_t>(dims.count()));
  std::ifstream in(vol_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
  if (!in) throw IoError("short read from " + vol_path.string());

  Volume3D v(dims, std::move(data), range);
  if (!v.all_finite()) throw IoError("non-finite values in " + vol_path.string());
  return v;
}

}  // namespace pupinet
