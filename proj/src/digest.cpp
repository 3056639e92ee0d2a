#include "pupinet/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <torch/torch.h>

namespace pupinet {

namespace {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

MdCtx new_sha256() {
  MdCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  return ctx;
}

void update(EVP_MD_CTX* ctx, const void* data, size_t n) {
  if (n && EVP_DigestUpdate(ctx, data, n) != 1) throw std::runtime_error("SHA-256 update failed");
}

std::string finish(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1) throw std::runtime_error("SHA-256 final failed");
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void hash_tensor(EVP_MD_CTX* ctx, const std::string& name, const torch::Tensor& t) {
  update(ctx, name.data(), name.size() + 1);
  const std::string dtype = c10::toString(t.scalar_type());
  update(ctx, dtype.data(), dtype.size() + 1);
  for (int64_t s : t.sizes()) update(ctx, &s, sizeof(s));
  auto c = t.detach().to(torch::kCPU).contiguous();
  update(ctx, c.data_ptr(), static_cast<size_t>(c.numel()) * c.element_size());
}

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  auto ctx = new_sha256();
  update(ctx.get(), bytes.data(), bytes.size());
  return finish(ctx.get());
}

std::string parameter_digest(const torch::nn::Module& m) {
  auto ctx = new_sha256();
  for (const auto& p : m.named_parameters()) hash_tensor(ctx.get(), p.key(), p.value());
  for (const auto& b : m.named_buffers()) hash_tensor(ctx.get(), "buffer:" + b.key(), b.value());
  return finish(ctx.get());
}

FrozenFlag freeze(torch::nn::Module& m) {
  for (auto& p : m.parameters()) p.set_requires_grad(false);
  m.eval();
  return {true, parameter_digest(m)};
}

bool verify_frozen(const torch::nn::Module& m, const FrozenFlag& flag) {
  if (!flag.frozen || flag.digest.empty()) return false;
  for (const auto& p : m.parameters()) {
    if (p.requires_grad()) return false;
  }
  return parameter_digest(m) == flag.digest;
}

}  // namespace pupinet
