#include "pupinet/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace pupinet {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

PairMetrics compute_pair_metrics(const std::string& id, const Volume3D& output, const Volume3D& target) {
  return {id, mae(output, target), psnr(output, target), ssim(output, target)};
}

MetricsReport evaluate_split(const Translator& model, const Dataset& split, Direction direction,
                             const std::string& split_name) {
  if (split.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  MetricsReport report;
  report.split = split_name;
  for (const auto& pair : split) {
    const Volume3D& source = direction == Direction::OctToOcta ? pair.oct : pair.octa;
    const Volume3D& target = direction == Direction::OctToOcta ? pair.octa : pair.oct;
    report.rows.push_back(compute_pair_metrics(pair.id, model(source), target));
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const PairMetrics& a, const PairMetrics& b) { return a.pair_id < b.pair_id; });

  report.mean.pair_id = "mean";
  for (const auto& r : report.rows) {
    report.mean.mae += r.mae;
    report.mean.psnr += r.psnr;
    report.mean.ssim += r.ssim;
  }
  const auto n = static_cast<double>(report.rows.size());
  report.mean.mae /= n;
  report.mean.psnr /= n;
  report.mean.ssim /= n;
  return report;
}

std::string MetricsReport::csv() const {
  std::ostringstream out;
  out << "pair_id,mae,psnr,ssim\n";
  auto row = [&](const PairMetrics& m) {
    out << m.pair_id << ',' << fmt("%.17g", m.mae) << ',' << fmt("%.17g", m.psnr) << ','
        << fmt("%.17g", m.ssim) << '\n';
  };
  for (const auto& r : rows) row(r);
  row(mean);
  return out.str();
}

MetricsReport read_metrics_csv(const std::string& text) {
  MetricsReport report;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("pair_id,mae,psnr,ssim", 0) != 0) {
    throw std::invalid_argument("metrics CSV must start with 'pair_id,mae,psnr,ssim'");
  }
  bool have_mean = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    PairMetrics m;
    std::string cell;
    std::getline(fields, m.pair_id, ',');
    try {
      std::getline(fields, cell, ',');
      m.mae = std::stod(cell);
      std::getline(fields, cell, ',');
      m.psnr = std::stod(cell);
      std::getline(fields, cell, ',');
      m.ssim = std::stod(cell);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed metrics row: " + line);
    }
    if (m.pair_id == "mean") {
      report.mean = m;
      have_mean = true;
    } else {
      report.rows.push_back(m);
    }
  }
  if (!have_mean && !report.rows.empty()) {
    report.mean.pair_id = "mean";
    for (const auto& r : report.rows) {
      report.mean.mae += r.mae / static_cast<double>(report.rows.size());
      report.mean.psnr += r.psnr / static_cast<double>(report.rows.size());
      report.mean.ssim += r.ssim / static_cast<double>(report.rows.size());
    }
  }
  return report;
}

std::string format_metrics_table(const std::vector<std::string>& headers,
                                 const std::vector<TableRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = headers;
  head.insert(head.end(), {"PSNR↑", "SSIM↑", "MAE↓"});
  cells.push_back(head);
  for (const auto& r : rows) {
    std::vector<std::string> line = r.labels;
    line.resize(headers.size());
    if (r.failure.empty()) {
      line.insert(line.end(), {fmt("%.4f", r.metrics.psnr), fmt("%.2f", 100.0 * r.metrics.ssim),
                               fmt("%.4f", r.metrics.mae)});
    } else {
      line.push_back("FAILED: " + r.failure);
    }
    cells.push_back(line);
  }

  // Display width: count UTF-8 lead bytes only.
  auto width = [](const std::string& s) {
    return static_cast<size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<size_t> widths;
  for (const auto& line : cells) {
    for (size_t i = 0; i < line.size(); ++i) {
      if (widths.size() <= i) widths.push_back(0);
      widths[i] = std::max(widths[i], width(line[i]));
    }
  }
  std::ostringstream out;
  for (const auto& line : cells) {
    for (size_t i = 0; i < line.size(); ++i) {
      out << line[i];
      if (i + 1 < line.size()) out << std::string(widths[i] - width(line[i]) + 2, ' ');
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace pupinet
