#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>
#include <torch/nn/module.h>

namespace pupinet {

// Single-file checkpoint: a JSON manifest, named tensors and opaque blobs.
//
//   "PUPIARCH" | u32 version | u64 len | manifest JSON
//   u32 n | n x (u32 len | name | u8 dtype | u32 ndim | i64 dims[ndim] | u64 bytes | payload)
//   u32 m | m x (u32 len | name | u64 bytes | payload)
//
// Integers and payloads are little-endian; dtype 0 = f32, 1 = f64, 2 = i64.
struct Archive {
  nlohmann::json manifest = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
  std::map<std::string, std::string> blobs;
};

void write_archive(const Archive& a, const std::filesystem::path& path);
Archive read_archive(const std::filesystem::path& path);

// Stores parameters and buffers under "<prefix>.<name>".
void put_module(Archive& a, const std::string& prefix, const torch::nn::Module& m);
// Copies stored values into an already-constructed module of the same
// architecture; throws IoError on any missing or mis-shaped entry.
void load_module(const Archive& a, const std::string& prefix, torch::nn::Module& m);

}  // namespace pupinet
