#include "pupinet/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <torch/torch.h>

#include "pupinet/errors.hpp"

namespace pupinet {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'P', 'U', 'P', 'I', 'A', 'R', 'C', 'H'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated archive " + path.string());
  return v;
}

std::string get_bytes(std::istream& in, uint64_t n, const fs::path& path) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("truncated archive " + path.string());
  return s;
}

uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw IoError(std::string("unsupported tensor dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_code(uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw IoError("unknown dtype code in archive");
  }
}

}  // namespace

void write_archive(const Archive& a, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put<uint32_t>(out, kVersion);
    const std::string manifest = a.manifest.dump();
    put<uint64_t>(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));

    put<uint32_t>(out, static_cast<uint32_t>(a.tensors.size()));
    for (const auto& [name, t] : a.tensors) {
      auto c = t.detach().to(torch::kCPU).contiguous();
      put<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint8_t>(out, dtype_code(c.scalar_type()));
      put<uint32_t>(out, static_cast<uint32_t>(c.dim()));
      for (int64_t s : c.sizes()) put<int64_t>(out, s);
      const uint64_t bytes = static_cast<uint64_t>(c.numel()) * c.element_size();
      put<uint64_t>(out, bytes);
      out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(bytes));
    }

    put<uint32_t>(out, static_cast<uint32_t>(a.blobs.size()));
    for (const auto& [name, blob] : a.blobs) {
      put<uint32_t>(out, static_cast<uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<uint64_t>(out, blob.size());
      out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Archive read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open archive " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + " is not a checkpoint archive");
  }
  if (get<uint32_t>(in, path) != kVersion) throw IoError("unsupported archive version");

  Archive a;
  const auto manifest_len = get<uint64_t>(in, path);
  try {
    a.manifest = nlohmann::json::parse(get_bytes(in, manifest_len, path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt manifest in " + path.string() + ": " + e.what());
  }

  const auto n = get<uint32_t>(in, path);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = get_bytes(in, get<uint32_t>(in, path), path);
    const auto dtype = dtype_from_code(get<uint8_t>(in, path));
    const auto ndim = get<uint32_t>(in, path);
    std::vector<int64_t> sizes(ndim);
    for (auto& s : sizes) s = get<int64_t>(in, path);
    const auto bytes = get<uint64_t>(in, path);
    auto t = torch::empty(sizes, torch::TensorOptions().dtype(dtype));
    if (bytes != static_cast<uint64_t>(t.numel()) * t.element_size()) {
      throw IoError("tensor '" + name + "' payload size mismatch in " + path.string());
    }
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("truncated archive " + path.string());
    a.tensors.emplace(std::move(name), std::move(t));
  }

  const auto m = get<uint32_t>(in, path);
  for (uint32_t i = 0; i < m; ++i) {
    std::string name = get_bytes(in, get<uint32_t>(in, path), path);
    a.blobs.emplace(std::move(name), get_bytes(in, get<uint64_t>(in, path), path));
  }
  return a;
}

void put_module(Archive& a, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& p : m.named_parameters()) a.tensors[prefix + "." + p.key()] = p.value().detach().clone();
  for (const auto& b : m.named_buffers()) a.tensors[prefix + "." + b.key()] = b.value().detach().clone();
}

void load_module(const Archive& a, const std::string& prefix, torch::nn::Module& m) {
  torch::NoGradGuard no_grad;
  auto copy_in = [&](const std::string& key, torch::Tensor& dst) {
    auto it = a.tensors.find(prefix + "." + key);
    if (it == a.tensors.end()) throw IoError("archive is missing '" + prefix + "." + key + "'");
    if (it->second.sizes() != dst.sizes()) {
      throw IoError("shape mismatch for '" + prefix + "." + key + "'");
    }
    dst.copy_(it->second);
  };
  for (auto& p : m.named_parameters()) copy_in(p.key(), p.value());
  for (auto& b : m.named_buffers()) copy_in(b.key(), b.value());
}

}  // namespace pupinet
