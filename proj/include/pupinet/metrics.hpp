#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pupinet/dataset.hpp"
#include "pupinet/direction.hpp"
#include "pupinet/volume.hpp"

namespace pupinet {

inline constexpr double kPsnrCapDb = 100.0;

namespace detail {

template <typename T, typename U>
void require_same_dims(const Volume<T>& a, const Volume<U>& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    throw ShapeError(std::string(what) + ": dims " + a.dims().str() + " vs " + b.dims().str());
  }
}

}  // namespace detail

template <typename T, typename U>
double mae(const Volume<T>& a, const Volume<U>& b) {
  detail::require_same_dims(a, b, "mae");
  double acc = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (size_t i = 0; i < x.size(); ++i) acc += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
  return acc / static_cast<double>(x.size());
}

template <typename T, typename U>
double mse(const Volume<T>& a, const Volume<U>& b) {
  detail::require_same_dims(a, b, "mse");
  double acc = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (size_t i = 0; i < x.size(); ++i) {
    const double e = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += e * e;
  }
  return acc / static_cast<double>(x.size());
}

// 10 log10(range^2 / MSE); identical inputs return kPsnrCapDb.
template <typename T, typename U>
double psnr(const Volume<T>& a, const Volume<U>& b, double data_range = 1.0) {
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / e));
}

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

// Mean SSIM over every valid window position of every (h, w) slice, with a
// uniform window and population statistics, averaged over depth. Window sums
// come from summed-area tables.
template <typename T, typename U>
double ssim(const Volume<T>& a, const Volume<U>& b, const SsimOptions& opt = {}) {
  detail::require_same_dims(a, b, "ssim");
  const Dims3& n = a.dims();
  const int64_t win = opt.window;
  if (win < 1 || n.h < win || n.w < win) {
    throw ShapeError("ssim window " + std::to_string(win) + " exceeds slice dims " +
                     std::to_string(n.h) + "x" + std::to_string(n.w));
  }
  const double c1 = (opt.k1 * opt.data_range) * (opt.k1 * opt.data_range);
  const double c2 = (opt.k2 * opt.data_range) * (opt.k2 * opt.data_range);
  const double inv_n = 1.0 / static_cast<double>(win * win);
  const int64_t sw = n.w + 1;
  const auto area = static_cast<size_t>((n.h + 1) * sw);
  std::vector<double> sx(area), sy(area), sxx(area), syy(area), sxy(area);

  double total = 0.0;
  for (int64_t d = 0; d < n.d; ++d) {
    for (int64_t h = 0; h < n.h; ++h) {
      double rx = 0, ry = 0, rxx = 0, ryy = 0, rxy = 0;
      for (int64_t w = 0; w < n.w; ++w) {
        const double x = a.at(d, h, w);
        const double y = b.at(d, h, w);
        rx += x;
        ry += y;
        rxx += x * x;
        ryy += y * y;
        rxy += x * y;
        const auto i = static_cast<size_t>((h + 1) * sw + w + 1);
        const auto up = static_cast<size_t>(h * sw + w + 1);
        sx[i] = sx[up] + rx;
        sy[i] = sy[up] + ry;
        sxx[i] = sxx[up] + rxx;
        syy[i] = syy[up] + ryy;
        sxy[i] = sxy[up] + rxy;
      }
    }
    auto box = [&](const std::vector<double>& s, int64_t h, int64_t w) {
      const auto i0 = static_cast<size_t>(h * sw + w);
      const auto i1 = static_cast<size_t>((h + win) * sw + w);
      return s[i1 + win] - s[i0 + win] - s[i1] + s[i0];
    };
    double slice = 0.0;
    for (int64_t h = 0; h + win <= n.h; ++h) {
      for (int64_t w = 0; w + win <= n.w; ++w) {
        const double mx = box(sx, h, w) * inv_n;
        const double my = box(sy, h, w) * inv_n;
        const double vx = box(sxx, h, w) * inv_n - mx * mx;
        const double vy = box(syy, h, w) * inv_n - my * my;
        const double cxy = box(sxy, h, w) * inv_n - mx * my;
        slice += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
    total += slice / static_cast<double>((n.h - win + 1) * (n.w - win + 1));
  }
  return total / static_cast<double>(n.d);
}

struct PairMetrics {
  std::string pair_id;
  double mae = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;  // raw, in [-1, 1]
};

struct MetricsReport {
  std::string split;
  std::vector<PairMetrics> rows;  // sorted by pair id
  PairMetrics mean;

  // "pair_id,mae,psnr,ssim" plus a trailing "mean" row.
  std::string csv() const;
};

PairMetrics compute_pair_metrics(const std::string& id, const Volume3D& output, const Volume3D& target);

using Translator = std::function<Volume3D(const Volume3D&)>;

// Runs `model` on every pair's source modality and scores it against the target modality.
MetricsReport evaluate_split(const Translator& model, const Dataset& split, Direction direction,
                             const std::string& split_name = "test");

// Table rows in PSNR, SSIM x 100, MAE order.
struct TableRow {
  std::vector<std::string> labels;
  PairMetrics metrics;
  std::string failure;  // non-empty when the row could not be produced
};
std::string format_metrics_table(const std::vector<std::string>& label_headers,
                                 const std::vector<TableRow>& rows);

MetricsReport read_metrics_csv(const std::string& text);

}  // namespace pupinet
