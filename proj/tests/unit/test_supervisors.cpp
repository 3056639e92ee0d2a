#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <torch/torch.h>

#include "oracles.hpp"
#include "pupinet/archive.hpp"
#include "pupinet/dataset.hpp"
#include "pupinet/layers.hpp"
#include "pupinet/supervisors.hpp"
#include "test_util.hpp"

using namespace pupinet;

namespace {

constexpr Dims3 kDims{8, 16, 16};

FrozenVsm frozen_vsm(uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
  VsmNet net(kDims, 4);
  init_weights(*net, seed, 0.1);
  net->to(dtype);
  FrozenVsm out{net, freeze(*net)};
  return out;
}

FrozenHfc frozen_hfc(uint64_t seed) {
  FrozenHfc h;
  h.ilm_opl = HfcNet(kDims.h, kDims.w, 4);
  h.opl_bm = HfcNet(kDims.h, kDims.w, 4);
  init_weights(*h.ilm_opl, seed, 0.1);
  init_weights(*h.opl_bm, seed + 1, 0.1);
  h.ilm_opl_flag = freeze(*h.ilm_opl);
  h.opl_bm_flag = freeze(*h.opl_bm);
  h.boundaries = phantom_boundaries(kDims);
  return h;
}

torch::Tensor random_octa(uint64_t seed, torch::Dtype dtype = torch::kFloat32) {
  auto g = torch::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::rand({1, 1, kDims.d, kDims.h, kDims.w}, g, torch::TensorOptions().dtype(dtype));
}

}  // namespace

TEST(Vsm, ShapeAndRange) {
  auto vsm = frozen_vsm(1);
  const auto pair = generate_phantom_pair(3, kDims, 3);
  const Projection2D p = vsm_forward(vsm.net, pair.octa);
  EXPECT_EQ(p.height(), kDims.h);
  EXPECT_EQ(p.width(), kDims.w);
  for (double v : p.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(vsm_forward(vsm.net, Volume3D({8, 16, 8})), ShapeError);
}

TEST(VsmLoss, RequiresFrozenNet) {
  FrozenVsm raw{VsmNet(kDims, 4), {}};
  auto x = random_octa(1);
  EXPECT_THROW(vsm_loss(raw, x, x), std::logic_error);
}

TEST(VsmLoss, IdenticalInputsGiveZeroWithZeroGradient) {
  auto vsm = frozen_vsm(2);
  auto real = random_octa(5);
  auto fake = real.clone().requires_grad_(true);
  auto loss = vsm_loss(vsm, fake, real);
  EXPECT_EQ(loss.item<double>(), 0.0);
  loss.backward();
  EXPECT_EQ(fake.grad().abs().max().item<double>(), 0.0);
}

TEST(VsmLoss, SymmetricInArguments) {
  auto vsm = frozen_vsm(3);
  auto a = random_octa(10), b = random_octa(11);
  EXPECT_DOUBLE_EQ(vsm_loss(vsm, a, b).item<double>(), vsm_loss(vsm, b, a).item<double>());
}

TEST(VsmLoss, MatchesHandComposition) {
  auto vsm = frozen_vsm(4, torch::kFloat64);
  for (uint64_t s = 0; s < 3; ++s) {
    auto a = random_octa(20 + s, torch::kFloat64), b = random_octa(40 + s, torch::kFloat64);
    torch::NoGradGuard no_grad;
    const Projection2D pa = projection_from_tensor(vsm.net->forward(a));
    const Projection2D pb = projection_from_tensor(vsm.net->forward(b));
    double acc = 0.0;
    for (size_t i = 0; i < pa.data().size(); ++i) acc += std::abs(pa.data()[i] - pb.data()[i]);
    acc /= static_cast<double>(pa.data().size());
    EXPECT_NEAR(vsm_loss(vsm, a, b).item<double>(), acc, 1e-9);
  }
}

TEST(VsmLoss, GradientReachesFakeOnly) {
  auto vsm = frozen_vsm(5);
  auto real = random_octa(1).requires_grad_(true);
  auto fake = random_octa(2).requires_grad_(true);
  vsm_loss(vsm, fake, real).backward();
  ASSERT_TRUE(fake.grad().defined());
  EXPECT_GT(fake.grad().abs().sum().item<double>(), 0.0);
  EXPECT_FALSE(real.grad().defined());
  for (const auto& p : vsm.net->parameters()) EXPECT_FALSE(p.grad().defined());
  EXPECT_TRUE(verify_frozen(*vsm.net, vsm.flag));
}

TEST(Hfc, ShapePreservedAndDeterministic) {
  auto hfc = frozen_hfc(1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Projection2D in(kDims.h, kDims.w);
  for (double& v : in.data()) v = u(rng);
  const auto a = hfc_forward(hfc.ilm_opl, in);
  const auto b = hfc_forward(hfc.ilm_opl, in);
  EXPECT_EQ(a.height(), kDims.h);
  EXPECT_EQ(a.width(), kDims.w);
  EXPECT_EQ(a, b);
  EXPECT_THROW(hfc_forward(hfc.ilm_opl, Projection2D(8, 16)), ShapeError);
  EXPECT_THROW(HfcNet(18, 16, 4), ShapeError);
}

TEST(LayerProjLoss, ZeroSymmetricFakeOnly) {
  auto hfc = frozen_hfc(2);
  auto real = random_octa(7);
  EXPECT_EQ(layer_proj_loss(hfc.ilm_opl, hfc.ilm_opl_flag, real, real).item<double>(), 0.0);
  auto other = random_octa(8);
  EXPECT_DOUBLE_EQ(layer_proj_loss(hfc.opl_bm, hfc.opl_bm_flag, real, other).item<double>(),
                   layer_proj_loss(hfc.opl_bm, hfc.opl_bm_flag, other, real).item<double>());
  auto r = real.clone().requires_grad_(true);
  auto f = other.clone().requires_grad_(true);
  layer_proj_loss(hfc.ilm_opl, hfc.ilm_opl_flag, r, f).backward();
  EXPECT_FALSE(r.grad().defined());
  EXPECT_GT(f.grad().abs().sum().item<double>(), 0.0);
  EXPECT_THROW(layer_proj_loss(hfc.ilm_opl, FrozenFlag{}, real, other), std::logic_error);
}

TEST(Dice, HandCases) {
  Projection2D empty(2, 2), full(2, 2, 1.0), half(2, 2, std::vector<double>{1, 1, 0, 0});
  EXPECT_EQ(dice(empty, empty), 1.0);
  EXPECT_EQ(dice(full, full), 1.0);
  EXPECT_EQ(dice(empty, full), 0.0);
  EXPECT_NEAR(dice(half, full), 2.0 * 2 / (2 + 4), 1e-15);
  Projection2D probs(2, 2, std::vector<double>{0.49, 0.5, 0.51, 0.0});
  Projection2D mask(2, 2, std::vector<double>{1, 1, 1, 0});
  EXPECT_NEAR(dice(probs, mask), 2.0 * 2 / (2 + 3), 1e-15);
  EXPECT_THROW(dice(empty, Projection2D(2, 3)), ShapeError);
}

TEST(Freeze, DigestTracksEveryBit) {
  auto vsm = frozen_vsm(9);
  EXPECT_TRUE(vsm.flag.frozen);
  EXPECT_EQ(vsm.flag.digest.size(), 64u);
  EXPECT_TRUE(verify_frozen(*vsm.net, vsm.flag));
  for (const auto& p : vsm.net->parameters()) EXPECT_FALSE(p.requires_grad());
  {
    torch::NoGradGuard no_grad;
    auto p = vsm.net->parameters().front();
    auto flat = p.view(-1);
    flat[0] = std::nextafter(flat[0].item<float>(), 1.0f);
  }
  EXPECT_FALSE(verify_frozen(*vsm.net, vsm.flag));
  EXPECT_EQ(frozen_vsm(9).flag.digest, frozen_vsm(9).flag.digest);
  EXPECT_NE(frozen_vsm(9).flag.digest, frozen_vsm(10).flag.digest);
}

TEST(SupervisorArchive, RoundTripAndTamperDetection) {
  testutil::TempDir dir("sup_archive");
  auto vsm = frozen_vsm(11);
  auto hfc = frozen_hfc(12);
  save_vsm(vsm, dir / "vsm.pupi");
  save_hfc(hfc, dir / "hfc.pupi");

  FrozenVsm v2 = load_vsm(dir / "vsm.pupi");
  EXPECT_EQ(v2.flag.digest, vsm.flag.digest);
  auto x = random_octa(3);
  EXPECT_TRUE(torch::equal(v2.net->forward(x), vsm.net->forward(x)));
  const FrozenHfc h2 = load_hfc(dir / "hfc.pupi");
  EXPECT_EQ(h2.ilm_opl_flag.digest, hfc.ilm_opl_flag.digest);
  EXPECT_EQ(h2.opl_bm_flag.digest, hfc.opl_bm_flag.digest);
  EXPECT_EQ(h2.boundaries, hfc.boundaries);

  Archive a = read_archive(dir / "vsm.pupi");
  a.tensors.begin()->second = a.tensors.begin()->second + 1e-3;
  write_archive(a, dir / "tampered.pupi");
  EXPECT_THROW(load_vsm(dir / "tampered.pupi"), TrainingAbort);

  a = read_archive(dir / "vsm.pupi");
  a.manifest.erase("digest");
  write_archive(a, dir / "nodigest.pupi");
  EXPECT_THROW(load_vsm(dir / "nodigest.pupi"), TrainingAbort);
  EXPECT_THROW(load_hfc(dir / "vsm.pupi"), TrainingAbort);

  FrozenVsm unfrozen{VsmNet(kDims, 4), {}};
  EXPECT_THROW(save_vsm(unfrozen, dir / "x.pupi"), std::logic_error);
}

TEST(Pretrain, SmallRunsLearnAndAreReproducible) {
  const Dataset data = make_phantom_dataset(21, 4, kDims, 3);
  const auto a = pretrain_vsm(data, 5, 1, {.learning_rate = 3e-3, .width = 4});
  const auto b = pretrain_vsm(data, 5, 1, {.learning_rate = 3e-3, .width = 4});
  ASSERT_EQ(a.epoch_loss.size(), 5u);
  EXPECT_LT(a.epoch_loss.back(), a.epoch_loss.front());
  EXPECT_EQ(a.vsm.flag.digest, b.vsm.flag.digest);
  EXPECT_TRUE(verify_frozen(*a.vsm.net, a.vsm.flag));

  const auto h = pretrain_hfc(data, 5, 1, {.learning_rate = 3e-3, .width = 4});
  const auto h2 = pretrain_hfc(data, 5, 1, {.learning_rate = 3e-3, .width = 4});
  EXPECT_LT(h.ilm_opl_loss.back(), h.ilm_opl_loss.front());
  EXPECT_LT(h.opl_bm_loss.back(), h.opl_bm_loss.front());
  EXPECT_EQ(h.hfc.ilm_opl_flag.digest, h2.hfc.ilm_opl_flag.digest);
  EXPECT_EQ(h.hfc.opl_bm_flag.digest, h2.hfc.opl_bm_flag.digest);

  EXPECT_THROW(pretrain_vsm({}, 1, 1), std::invalid_argument);
  EXPECT_THROW(pretrain_hfc({}, 1, 1), std::invalid_argument);
}
