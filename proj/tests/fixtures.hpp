#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kbtrust/metrics.hpp"
#include "kbtrust/multi_layer.hpp"
#include "kbtrust/single_layer.hpp"
#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace fixtures {

using namespace kbt;

inline SourceKey page(const std::string& id) { return SourceKey{"site.com", "nationality", id, std::nullopt}; }
inline ExtractorKey extractor(const std::string& id) {
  return ExtractorKey{id, std::nullopt, std::nullopt, std::nullopt, std::nullopt};
}
inline const DataItem kObama{"Barack Obama", "nationality"};

// Obama's nationality extracted by five extractors from eight pages of one
// website, so that every extractor is in every page's scope.
inline std::vector<ExtractionRecord> obama_records() {
  const char* table[8][5] = {
      {"USA", "USA", "USA", "USA", "Kenya"},
      {"USA", "USA", "USA", "N.Amer.", nullptr},
      {"USA", nullptr, "USA", "N.Amer.", nullptr},
      {"USA", nullptr, "USA", "Kenya", nullptr},
      {"Kenya", "Kenya", "Kenya", "Kenya", "Kenya"},
      {"Kenya", nullptr, "Kenya", "USA", nullptr},
      {nullptr, nullptr, "Kenya", nullptr, "Kenya"},
      {nullptr, nullptr, nullptr, nullptr, "Kenya"},
  };
  std::vector<ExtractionRecord> out;
  for (int w = 0; w < 8; ++w) {
    for (int e = 0; e < 5; ++e) {
      if (table[w][e] == nullptr) continue;
      out.push_back({extractor("E" + std::to_string(e + 1)), page("W" + std::to_string(w + 1)), kObama, table[w][e], 1.0});
    }
  }
  return out;
}

inline QualityParams obama_quality(double source_accuracy = 0.6) {
  const double Q[] = {.01, .01, .06, .22, .17};
  const double R[] = {.99, .5, .99, .33, .17};
  const double P[] = {.99, .99, .85, .33, .25};
  QualityParams q;
  for (int e = 0; e < 5; ++e) {
    const auto key = extractor("E" + std::to_string(e + 1));
    q.P[key] = P[e];
    q.R[key] = R[e];
    q.Q[key] = Q[e];
  }
  for (int w = 1; w <= 8; ++w) q.A[page("W" + std::to_string(w))] = source_accuracy;
  return q;
}

// p(C=1 | X) by Bayes' rule on the explicit product of per-extractor
// likelihoods, without log-space arithmetic.
struct ScopedExtractor {
  double R, Q;
  bool extracted;
};

inline double bayes_correctness(const std::vector<ScopedExtractor>& scoped, double alpha) {
  double provided = alpha;
  double not_provided = 1.0 - alpha;
  for (const auto& s : scoped) {
    provided *= s.extracted ? s.R : 1.0 - s.R;
    not_provided *= s.extracted ? s.Q : 1.0 - s.Q;
  }
  return provided / (provided + not_provided);
}

// Single-truth posterior by explicit enumeration of the n+1 domain values:
// candidates 0..k-1 are observed, k..n unobserved. Returns n+1 probabilities.
inline std::vector<double> brute_force_accu(const std::vector<std::pair<std::size_t, double>>& claims, std::size_t k,
                                            int n) {
  std::vector<double> joint(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t truth = 0; truth < joint.size(); ++truth) {
    double lik = 1.0 / static_cast<double>(n + 1);
    for (const auto& [candidate, a] : claims) lik *= candidate == truth ? a : (1.0 - a) / n;
    joint[truth] = lik;
  }
  (void)k;
  double z = 0.0;
  for (double x : joint) z += x;
  for (double& x : joint) x /= z;
  return joint;
}

// Precision/recall at every distinct score threshold by direct counting,
// then trapezoids from (0, first precision).
inline double brute_force_auc_pr(const std::vector<std::pair<double, bool>>& scored) {
  std::vector<double> thresholds;
  for (const auto& s : scored) thresholds.push_back(s.first);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0;
  for (const auto& s : scored) positives += s.second ? 1 : 0;
  std::vector<std::pair<double, double>> curve;
  for (double th : thresholds) {
    double tp = 0, selected = 0;
    for (const auto& s : scored) {
      if (s.first >= th) {
        ++selected;
        tp += s.second ? 1 : 0;
      }
    }
    curve.emplace_back(tp / positives, tp / selected);
  }
  double area = 0, r0 = 0, p0 = curve.front().second;
  for (const auto& [r, p] : curve) {
    area += (r - r0) * (p + p0) / 2;
    r0 = r;
    p0 = p;
  }
  return area;
}

inline double mean(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double standard_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace fixtures
