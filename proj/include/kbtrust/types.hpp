#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbt {

/// A (subject, predicate) pair naming one attribute of one entity.
struct DataItem {
  std::string subject;
  std::string predicate;

  auto operator<=>(const DataItem&) const = default;
};

/// Canonical serialized object of a triple.
using Value = std::string;

/// Web source at some granularity of <website, predicate, webpage>.
///
/// Specificity is prefix-ordered: a webpage implies a predicate. `shard` is
/// set only on sub-sources produced by splitting an oversized source.
struct SourceKey {
  std::string website;
  std::optional<std::string> predicate;
  std::optional<std::string> webpage;
  std::optional<std::uint32_t> shard;

  auto operator<=>(const SourceKey&) const = default;

  bool well_formed() const {
    return !website.empty() && (!webpage || predicate);
  }
  std::string str() const;
};

/// Extractor at some granularity of <extractor, pattern, predicate, website>.
struct ExtractorKey {
  std::string extractor;
  std::optional<std::string> pattern;
  std::optional<std::string> predicate;
  std::optional<std::string> website;
  std::optional<std::uint32_t> shard;

  auto operator<=>(const ExtractorKey&) const = default;

  bool well_formed() const {
    return !extractor.empty() && (!predicate || pattern) && (!website || predicate);
  }
  std::string str() const;
};

/// Parses the `str()` rendering of a key back. Throws std::invalid_argument.
SourceKey parse_source_key(const std::string& text);
ExtractorKey parse_extractor_key(const std::string& text);

/// One observation: extractor `e` extracted (d, v) from source `w`.
struct ExtractionRecord {
  ExtractorKey e;
  SourceKey w;
  DataItem d;
  Value v;
  double confidence = 1.0;
};

/// Error raised for invalid configuration or malformed input.
class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SingleVariant { kAccu, kPopAccu };

struct FusionConfig {
  int n_single = 100;
  int n_multi = 10;
  double gamma = 0.25;
  double alpha0 = 0.5;
  double default_A = 0.8;
  double default_R = 0.8;
  double default_Q = 0.2;
  int t_max = 5;
  int prior_update_start_iter = 3;
  double clamp_eps = 1e-6;
  std::optional<double> confidence_threshold;
  std::size_t m_min = 5;
  std::size_t M_max = 10000;
  double convergence_tol = 1e-6;
  std::uint64_t rng_seed = 0;

  // Ablation switches.
  bool hard_map = false;      // use argmax C in the V-step and M-steps
  bool freeze_alpha = false;  // never re-estimate the correctness prior
  SingleVariant single_variant = SingleVariant::kAccu;

  int workers = 1;

  /// Throws FusionError when an invariant does not hold.
  void validate() const;

  /// Precision consistent with default_R/default_Q under gamma.
  double default_P() const;
};

/// Source accuracies and extractor precision/recall/false-extraction rate.
struct QualityParams {
  std::map<SourceKey, double> A;
  std::map<ExtractorKey, double> P;
  std::map<ExtractorKey, double> R;
  std::map<ExtractorKey, double> Q;
};

/// Distribution over dom(d): explicit mass per observed candidate plus the
/// mass of each of the (n+1-k) unobserved domain values.
struct ValueDistribution {
  std::vector<std::pair<Value, double>> observed;
  double residual_each = 0.0;
  std::size_t unobserved_count = 0;

  double prob(const Value& v) const;
  double total() const;
};

/// Probability of p clamped into [eps, 1-eps].
inline double clamp(double p, double eps) {
  if (p < eps) return eps;
  if (p > 1.0 - eps) return 1.0 - eps;
  return p;
}

/// Numerically stable logistic function.
double sigmoid(double x);

/// ln(p / (1-p)).
double logit(double p);

}  // namespace kbt
