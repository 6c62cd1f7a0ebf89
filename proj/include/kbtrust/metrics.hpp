#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kbt::metrics {

/// Six-decimal fixed rendering used by every output file.
std::string fixed6(double x);

/// Mean of (p - truth)^2 over the keys present in both maps. Truth may be an
/// indicator or a real value (SqA). nullopt on an empty intersection.
template <typename Key>
std::optional<double> square_loss(const std::map<Key, double>& predicted, const std::map<Key, double>& truth) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [key, t] : truth) {
    auto it = predicted.find(key);
    if (it == predicted.end()) continue;
    const double diff = it->second - t;
    sum += diff * diff;
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

/// (prediction, label) pairs over the keys present in both maps, in key order.
template <typename Key>
std::vector<std::pair<double, bool>> join_labels(const std::map<Key, double>& predicted,
                                                 const std::map<Key, bool>& truth) {
  std::vector<std::pair<double, bool>> out;
  for (const auto& [key, label] : truth) {
    auto it = predicted.find(key);
    if (it != predicted.end()) out.emplace_back(it->second, label);
  }
  return out;
}

struct CalibrationBucket {
  double lo;
  double hi;  // exclusive, except for the final [1, 1] bucket
  double predicted_mean;
  double empirical_accuracy;
  std::size_t count;
};

/// Fine buckets near 0 and 1, 0.05-wide in between, and a closed [1, 1].
const std::vector<std::pair<double, double>>& calibration_bounds();
std::size_t bucket_of(double p);

struct Calibration {
  double wdev;
  std::vector<CalibrationBucket> buckets;  // every bucket, including empty ones
};

/// Count-weighted mean of (bucket mean prediction - bucket accuracy)^2.
std::optional<Calibration> calibration(std::span<const std::pair<double, bool>> scored);

struct PrCurve {
  double auc;
  std::vector<std::pair<double, double>> points;  // (recall, precision)
};

/// Thresholds at each distinct score (descending; ties keep input order),
/// trapezoidal area anchored at recall 0 with the first point's precision.
/// nullopt without positives.
std::optional<PrCurve> pr_curve(std::span<const std::pair<double, bool>> scored);

/// Fraction of all triples that received a probability.
std::optional<double> coverage(std::size_t evaluated, std::size_t total);

struct EvalReport {
  std::optional<double> sqv, sqc, sqa;
  std::optional<double> wdev;
  std::optional<double> auc_pr;
  std::optional<double> cov;
  std::vector<CalibrationBucket> calibration_buckets;
  std::vector<std::pair<double, double>> pr_points;
};

/// Flat key=value text; absent metrics are written as "NA".
void write_report(std::ostream& out, const EvalReport& report);
void write_calibration_csv(std::ostream& out, const EvalReport& report);
void write_pr_csv(std::ostream& out, const EvalReport& report);

}  // namespace kbt::metrics
