#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pupinet/dataset.hpp"
#include "pupinet/metrics.hpp"

using namespace pupinet;

namespace {

Volume3Dd offset(const Volume3Dd& v, double c) {
  Volume3Dd out = v;
  for (double& x : out.data()) x += c;
  return out;
}

}  // namespace

TEST(Mae, HandCasesOracleAndSymmetry) {
  std::mt19937_64 rng(1);
  const auto a = oracle::random_volume({4, 5, 6}, rng), b = oracle::random_volume({4, 5, 6}, rng);
  EXPECT_EQ(mae(a, a), 0.0);
  EXPECT_NEAR(mae(a, offset(a, 0.1)), 0.1, 1e-12);
  EXPECT_NEAR(mae(a, b), oracle::mean_abs_diff(a, b), 1e-12);
  EXPECT_EQ(mae(a, b), mae(b, a));
  EXPECT_THROW(mae(a, Volume3Dd({4, 5, 5})), ShapeError);
}

TEST(Psnr, ClosedFormCapAndOracle) {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_volume({4, 8, 8}, rng, 0.0, 0.9);
  EXPECT_NEAR(psnr(a, offset(a, 0.1)), 20.0, 1e-9);
  EXPECT_EQ(psnr(a, a), 100.0);
  const auto b = oracle::random_volume({4, 8, 8}, rng);
  double se = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) se += std::pow(a.data()[i] - b.data()[i], 2);
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / (se / a.data().size())), 1e-9);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  std::mt19937_64 rng(3);
  const auto a = oracle::random_volume({4, 8, 8}, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> noise(a.data().size());
  for (double& n : noise) n = u(rng);
  double last = 1e9;
  for (double amp : {0.01, 0.05, 0.2}) {
    Volume3Dd b = a;
    for (size_t i = 0; i < noise.size(); ++i) b.data()[i] += amp * noise[i];
    const double p = psnr(a, b);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Ssim, IdenticalIsExactlyOne) {
  std::mt19937_64 rng(4);
  const auto a = oracle::random_volume({3, 16, 16}, rng);
  EXPECT_EQ(ssim(a, a), 1.0);
  const auto f = a.cast<float>();
  EXPECT_EQ(ssim(f, f), 1.0);
}

TEST(Ssim, InvertedStructureIsBelowOne) {
  std::mt19937_64 rng(5);
  const auto a = oracle::random_volume({2, 12, 12}, rng);
  Volume3Dd b = a;
  for (double& x : b.data()) x = 1.0 - x;
  EXPECT_LT(ssim(a, b), 1.0);
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, MatchesWindowedLoopOracle) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto a = oracle::random_volume({1, 16, 16}, rng);
    auto b = a;
    std::normal_distribution<double> n(0.0, 0.05 * (1 + t % 5));
    for (double& x : b.data()) x = std::clamp(x + n(rng), 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-6);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
  const auto a = oracle::random_volume({3, 10, 13}, rng), b = oracle::random_volume({3, 10, 13}, rng);
  EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-6);
}

TEST(Ssim, ScaleInvariantWithMatchingDataRange) {
  std::mt19937_64 rng(7);
  const auto a = oracle::random_volume({2, 16, 16}, rng), b = oracle::random_volume({2, 16, 16}, rng);
  for (double s : {0.5, 3.0, 255.0}) {
    Volume3Dd as = a, bs = b;
    for (double& x : as.data()) x *= s;
    for (double& x : bs.data()) x *= s;
    SsimOptions opt;
    opt.data_range = s;
    EXPECT_NEAR(ssim(as, bs, opt), ssim(a, b), 1e-6);
  }
}

TEST(Ssim, RejectsSlicesSmallerThanWindow) {
  EXPECT_THROW(ssim(Volume3Dd({2, 6, 16}), Volume3Dd({2, 6, 16})), ShapeError);
}

namespace {

Dataset tiny_set(int n) {
  Dataset d;
  std::mt19937_64 rng(8);
  for (int i = n - 1; i >= 0; --i) {
    PairRecord p;
    p.id = pair_id(i);
    p.oct = oracle::random_volume({2, 8, 8}, rng).cast<float>();
    p.octa = oracle::random_volume({2, 8, 8}, rng).cast<float>();
    d.push_back(p);
  }
  return d;
}

}  // namespace

TEST(EvaluateSplit, IdentityModelIsPerfect) {
  const Dataset d = tiny_set(3);
  std::map<const void*, const Volume3D*> target;
  for (const auto& p : d) target[p.oct.data().data()] = &p.octa;
  const auto report = evaluate_split([&](const Volume3D& v) { return *target.at(v.data().data()); }, d,
                                     Direction::OctToOcta);
  for (const auto& r : report.rows) {
    EXPECT_EQ(r.mae, 0.0);
    EXPECT_EQ(r.ssim, 1.0);
    EXPECT_EQ(r.psnr, 100.0);
  }
}

TEST(EvaluateSplit, RowsSortedAndMeanIsArithmetic) {
  const Dataset d = tiny_set(4);
  const auto report = evaluate_split([](const Volume3D& v) { return v; }, d, Direction::OctaToOct, "val");
  ASSERT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(report.split, "val");
  double mae_sum = 0, psnr_sum = 0, ssim_sum = 0;
  for (size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(report.rows[i].pair_id, pair_id(static_cast<int64_t>(i)));
    mae_sum += report.rows[i].mae;
    psnr_sum += report.rows[i].psnr;
    ssim_sum += report.rows[i].ssim;
  }
  EXPECT_NEAR(report.mean.mae, mae_sum / 4, 1e-12);
  EXPECT_NEAR(report.mean.psnr, psnr_sum / 4, 1e-12);
  EXPECT_NEAR(report.mean.ssim, ssim_sum / 4, 1e-12);
  EXPECT_THROW(evaluate_split([](const Volume3D& v) { return v; }, Dataset{}, Direction::OctToOcta),
               std::invalid_argument);
}

TEST(MetricsReport, CsvRoundTrip) {
  const auto report = evaluate_split([](const Volume3D& v) { return v; }, tiny_set(3), Direction::OctToOcta);
  const auto back = read_metrics_csv(report.csv());
  ASSERT_EQ(back.rows.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.rows[i].pair_id, report.rows[i].pair_id);
    EXPECT_EQ(back.rows[i].mae, report.rows[i].mae);
    EXPECT_EQ(back.rows[i].psnr, report.rows[i].psnr);
    EXPECT_EQ(back.rows[i].ssim, report.rows[i].ssim);
  }
  EXPECT_EQ(back.mean.mae, report.mean.mae);
  EXPECT_THROW(read_metrics_csv("id,x\n"), std::invalid_argument);
}

TEST(MetricsTable, ColumnOrderAndPrecision) {
  PairMetrics m{"mean", 0.0199, 30.5832, 0.9064};
  const auto table = format_metrics_table({"pix2pixGAN", "VSM", "HFC"},
                                          {{{"✓", "✓", "✓"}, m, ""}, {{"✓", "", ""}, {}, "boom"}});
  std::istringstream in(table);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  EXPECT_LT(header.find("PSNR↑"), header.find("SSIM↑"));
  EXPECT_LT(header.find("SSIM↑"), header.find("MAE↓"));
  EXPECT_NE(row1.find("30.5832"), std::string::npos);
  EXPECT_NE(row1.find("90.64"), std::string::npos);
  EXPECT_NE(row1.find("0.0199"), std::string::npos);
  EXPECT_NE(row2.find("FAILED: boom"), std::string::npos);
}
