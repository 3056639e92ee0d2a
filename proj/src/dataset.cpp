#include "pupinet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pupinet/volume_io.hpp"

namespace pupinet {

namespace fs = std::filesystem;
using nlohmann::json;

SplitIndices split_dataset(int64_t n, const std::array<double, 3>& ratios) {
  if (n < 3) throw std::invalid_argument("split_dataset needs at least 3 items");
  for (double r : ratios) {
    if (!(r > 0.0)) throw std::invalid_argument("split ratios must be positive");
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");

  // The epsilon absorbs representation error in ratios such as 1/15.
  const auto n_train = static_cast<int64_t>(std::floor(n * ratios[0] + 1e-9));
  const auto n_val = static_cast<int64_t>(std::floor(n * ratios[1] + 1e-9));
  if (n_train + n_val > n) throw std::invalid_argument("split ratios overflow the item count");

  SplitIndices s;
  s.train.resize(static_cast<size_t>(n_train));
  s.val.resize(static_cast<size_t>(n_val));
  s.test.resize(static_cast<size_t>(n - n_train - n_val));
  std::iota(s.train.begin(), s.train.end(), int64_t{0});
  std::iota(s.val.begin(), s.val.end(), n_train);
  std::iota(s.test.begin(), s.test.end(), n_train + n_val);
  return s;
}

std::string pair_id(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(index));
  return buf;
}

uint64_t derive_pair_seed(uint64_t seed, int64_t index) {
  // splitmix64 finaliser over (seed, index)
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset make_phantom_dataset(uint64_t seed, int64_t n_pairs, Dims3 dims, int n_vessels) {
  Dataset out;
  out.reserve(static_cast<size_t>(n_pairs));
  for (int64_t i = 0; i < n_pairs; ++i) {
    PhantomPair p = generate_phantom_pair(derive_pair_seed(seed, i), dims, n_vessels);
    out.push_back({pair_id(i), std::move(p.oct), std::move(p.octa), std::move(p.vessel_mask),
                   p.boundaries, p.seed});
  }
  return out;
}

void write_pair(const PairRecord& pair, const fs::path& root) {
  const fs::path dir = root / "pairs" / pair.id;
  fs::create_directories(dir);
  save_volume(pair.oct, dir / "oct.vol");
  save_volume(pair.octa, dir / "octa.vol");

  const auto& m = pair.vessel_mask;
  std::vector<float> mask(m.data().begin(), m.data().end());
  save_volume(Volume3D({1, m.height(), m.width()}, std::move(mask)), dir / "mask.vol");

  json b = {{"ilm_z", pair.boundaries.ilm_z},
            {"opl_z", pair.boundaries.opl_z},
            {"bm_z", pair.boundaries.bm_z},
            {"seed", pair.seed}};
  std::ofstream out(dir / "boundaries.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "boundaries.json").string());
  out << b.dump(2) << '\n';
}

void write_dataset(const Dataset& data, const fs::path& root) {
  for (const auto& p : data) write_pair(p, root);
}

Dataset load_dataset(const fs::path& root) {
  const fs::path pairs = root / "pairs";
  if (!fs::is_directory(pairs)) throw IoError("no pairs/ directory under " + root.string());

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(pairs)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw IoError("dataset at " + root.string() + " has no pairs");

  Dataset out;
  for (const auto& dir : dirs) {
    PairRecord rec;
    rec.id = dir.filename().string();
    rec.oct = load_volume(dir / "oct.vol");
    rec.octa = load_volume(dir / "octa.vol");
    if (!(rec.oct.dims() == rec.octa.dims())) {
      throw IoError("oct/octa dims differ in pair " + rec.id);
    }
    const Volume3D mask = load_volume(dir / "mask.vol");
    const Dims3& n = rec.oct.dims();
    if (mask.dims().d != 1 || mask.dims().h != n.h || mask.dims().w != n.w) {
      throw IoError("mask dims do not match volume plane in pair " + rec.id);
    }
    rec.vessel_mask = Projection2D(n.h, n.w, std::vector<double>(mask.data().begin(), mask.data().end()));

    try {
      std::ifstream in(dir / "boundaries.json");
      const json b = json::parse(in);
      rec.boundaries = {b.at("ilm_z").get<int64_t>(), b.at("opl_z").get<int64_t>(),
                        b.at("bm_z").get<int64_t>()};
      rec.seed = b.value("seed", uint64_t{0});
    } catch (const json::exception& e) {
      throw IoError("bad boundaries.json in pair " + rec.id + ": " + e.what());
    }
    rec.boundaries.validate(n.d);
    out.push_back(std::move(rec));
  }
  return out;
}

Dataset select(const Dataset& data, const std::vector<int64_t>& indices) {
  Dataset out;
  out.reserve(indices.size());
  for (int64_t i : indices) {
    if (i < 0 || i >= static_cast<int64_t>(data.size())) throw std::out_of_range("pair index out of range");
    out.push_back(data[static_cast<size_t>(i)]);
  }
  return out;
}

}  // namespace pupinet
