#pragma once

#include <span>
#include <string>

#include <torch/nn/module.h>

namespace pupinet {

std::string sha256_hex(std::span<const unsigned char> bytes);

// SHA-256 over every parameter and buffer in traversal order: name, dtype,
// shape and raw little-endian payload. Any bit flip changes the digest.
std::string parameter_digest(const torch::nn::Module& m);

// Recorded when a pretrained network is frozen.
struct FrozenFlag {
  bool frozen = false;
  std::string digest;
};

// Disables gradients, switches to eval mode and captures the digest.
FrozenFlag freeze(torch::nn::Module& m);
// True when the flag is set, no parameter requires grad, and the digest still matches.
bool verify_frozen(const torch::nn::Module& m, const FrozenFlag& flag);

}  // namespace pupinet
