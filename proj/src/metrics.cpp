#include "kbtrust/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

namespace kbt::metrics {

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

namespace {

std::string fmt_opt(const std::optional<double>& x) { return x ? fixed6(*x) : "NA"; }

}  // namespace

const std::vector<std::pair<double, double>>& calibration_bounds() {
  static const std::vector<std::pair<double, double>> bounds = [] {
    std::vector<int> edges = {0, 1, 2, 3, 4};
    for (int e = 5; e <= 90; e += 5) edges.push_back(e);
    for (int e = 95; e <= 100; ++e) edges.push_back(e);
    std::vector<std::pair<double, double>> b;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) b.emplace_back(edges[i] / 100.0, edges[i + 1] / 100.0);
    b.emplace_back(1.0, 1.0);
    return b;
  }();
  return bounds;
}

std::size_t bucket_of(double p) {
  const auto& bounds = calibration_bounds();
  if (p >= 1.0) return bounds.size() - 1;
  auto it = std::upper_bound(bounds.begin(), bounds.end() - 1, p,
                             [](double x, const std::pair<double, double>& b) { return x < b.first; });
  if (it == bounds.begin()) return 0;
  return static_cast<std::size_t>(it - bounds.begin()) - 1;
}

std::optional<Calibration> calibration(std::span<const std::pair<double, bool>> scored) {
  if (scored.empty()) return std::nullopt;
  const auto& bounds = calibration_bounds();
  std::vector<double> pred_sum(bounds.size(), 0.0);
  std::vector<std::size_t> positives(bounds.size(), 0);
  std::vector<std::size_t> counts(bounds.size(), 0);
  for (const auto& [p, label] : scored) {
    const std::size_t b = bucket_of(p);
    pred_sum[b] += p;
    positives[b] += label ? 1 : 0;
    ++counts[b];
  }
  Calibration out{0.0, {}};
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    CalibrationBucket bucket{bounds[b].first, bounds[b].second, 0.0, 0.0, counts[b]};
    if (counts[b] > 0) {
      const double n = static_cast<double>(counts[b]);
      bucket.predicted_mean = pred_sum[b] / n;
      bucket.empirical_accuracy = static_cast<double>(positives[b]) / n;
      const double dev = bucket.predicted_mean - bucket.empirical_accuracy;
      out.wdev += n * dev * dev;
    }
    out.buckets.push_back(bucket);
  }
  out.wdev /= static_cast<double>(scored.size());
  return out;
}

std::optional<PrCurve> pr_curve(std::span<const std::pair<double, bool>> scored) {
  const auto total_pos =
      static_cast<std::size_t>(std::count_if(scored.begin(), scored.end(), [](const auto& s) { return s.second; }));
  if (total_pos == 0) return std::nullopt;

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scored[a].first > scored[b].first; });

  PrCurve out{0.0, {}};
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    tp += scored[order[i]].second ? 1 : 0;
    ++seen;
    const bool last_of_tie = i + 1 == order.size() || scored[order[i + 1]].first != scored[order[i]].first;
    if (!last_of_tie) continue;
    out.points.emplace_back(static_cast<double>(tp) / total_pos, static_cast<double>(tp) / seen);
  }
  double prev_r = 0.0;
  double prev_p = out.points.front().second;
  for (const auto& [r, p] : out.points) {
    out.auc += (r - prev_r) * (p + prev_p) / 2.0;
    prev_r = r;
    prev_p = p;
  }
  return out;
}

std::optional<double> coverage(std::size_t evaluated, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(evaluated) / static_cast<double>(total);
}

void write_report(std::ostream& out, const EvalReport& report) {
  out << "sqv=" << fmt_opt(report.sqv) << '\n';
  out << "sqc=" << fmt_opt(report.sqc) << '\n';
  out << "sqa=" << fmt_opt(report.sqa) << '\n';
  out << "wdev=" << fmt_opt(report.wdev) << '\n';
  out << "auc_pr=" << fmt_opt(report.auc_pr) << '\n';
  out << "cov=" << fmt_opt(report.cov) << '\n';
}

void write_calibration_csv(std::ostream& out, const EvalReport& report) {
  out << "lo,hi,predicted_mean,empirical_accuracy,count\n";
  for (const auto& b : report.calibration_buckets) {
    out << fixed6(b.lo) << ',' << fixed6(b.hi) << ',' << fixed6(b.predicted_mean) << ','
        << fixed6(b.empirical_accuracy) << ',' << b.count << '\n';
  }
}

void write_pr_csv(std::ostream& out, const EvalReport& report) {
  out << "recall,precision\n";
  for (const auto& [r, p] : report.pr_points) out << fixed6(r) << ',' << fixed6(p) << '\n';
}

}  // namespace kbt::metrics
