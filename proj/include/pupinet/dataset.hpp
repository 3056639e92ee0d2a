#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "pupinet/phantom.hpp"

namespace pupinet {

struct PairRecord {
  std::string id;
  Volume3D oct;
  Volume3D octa;
  Projection2D vessel_mask;
  LayerBoundaries boundaries;
  uint64_t seed = 0;
};

using Dataset = std::vector<PairRecord>;

struct SplitIndices {
  std::vector<int64_t> train;
  std::vector<int64_t> val;
  std::vector<int64_t> test;
};

// Contiguous split by index: train and val sizes are floor(n * ratio), the
// remainder goes to test.
SplitIndices split_dataset(int64_t n, const std::array<double, 3>& ratios);

std::string pair_id(int64_t index);

// In-memory phantom set; pair i uses seed `derive_pair_seed(seed, i)`.
Dataset make_phantom_dataset(uint64_t seed, int64_t n_pairs, Dims3 dims = kDeskDims,
                             int n_vessels = kDefaultVessels);
uint64_t derive_pair_seed(uint64_t seed, int64_t index);

// Layout: <root>/pairs/<id>/{oct.vol, octa.vol, mask.vol, boundaries.json}.
void write_dataset(const Dataset& data, const std::filesystem::path& root);
void write_pair(const PairRecord& pair, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

Dataset select(const Dataset& data, const std::vector<int64_t>& indices);

}  // namespace pupinet
