#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kbtrust/posterior.hpp"
#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace kbt {

/// Joint inference over extraction correctness C, value truth V, source
/// accuracy A and extractor quality (P, R, Q).
namespace multi {

/// Log-odds contribution of one extractor: `pre` when it extracts a triple,
/// `abs` when it does not.
struct Vote {
  double pre = 0.0;
  double abs = 0.0;
};

/// Q = gamma/(1-gamma) * (1-P)/P * R on clamped inputs, clamped.
double derive_q(double precision, double recall, double gamma, double eps);

/// pre = ln R - ln Q, abs = ln(1-R) - ln(1-Q) on clamped inputs.
Vote compute_vote(double recall, double q, double eps);

struct VoteWeights {
  std::map<ExtractorKey, double> pre;
  std::map<ExtractorKey, double> abs;
};

/// Votes for every extractor that has both R and Q in `quality`.
VoteWeights compute_votes(const QualityParams& quality, double eps);

/// One scoped extractor's evidence about a (w, d, v): its vote and the
/// probability it extracted the triple (0 when it did not).
struct Evidence {
  Vote vote;
  double confidence = 0.0;
};

/// Binarizes at the threshold when one is set.
inline double effective_confidence(double confidence, const std::optional<double>& threshold) {
  if (!threshold) return confidence;
  return confidence >= *threshold ? 1.0 : 0.0;
}

/// sum_e [conf_e * pre_e + (1 - conf_e) * abs_e].
double vote_count(std::span<const Evidence> scoped, const std::optional<double>& threshold = std::nullopt);

/// p(C_wdv = 1 | X) = sigmoid(vote count + logit(alpha)). Returns alpha when
/// nothing is in scope.
double extraction_posterior(std::span<const Evidence> scoped, double alpha, double eps,
                            const std::optional<double>& threshold = std::nullopt);

/// One source's (soft) provision of a candidate value.
struct Provision {
  std::size_t candidate;
  double correctness;  // p(C_wdv = 1 | X), or the 0/1 MAP estimate
  double accuracy;     // A_w
};

/// Weighted single-truth posterior: candidate score
/// sum_w p(C_wdv=1|X) * ln(n A_w / (1 - A_w)), unobserved values score 0.
ItemPosterior value_posterior(std::span<const Provision> provisions, std::size_t k, int n, double eps);

/// alpha' = p(V_d=v) A_w + (1 - p(V_d=v)) (1 - A_w), clamped.
double update_alpha(double value_prob, double accuracy, double eps);

/// A_w = sum c * p(V) / sum c over provisions with c > 0. Each entry is
/// (p(C=1|X), p(V_d=v|X)). nullopt when the denominator is 0.
std::optional<double> estimate_source_accuracy(std::span<const std::pair<double, double>> correctness_and_truth);

struct ExtractorQuality {
  double precision;
  double recall;
};

/// P = sum conf * c / sum conf over the extractor's extractions (entries are
/// (conf, c)); R = sum conf * c / `scope_correctness`, the summed correctness
/// of every triple in the extractor's scope. nullopt without positive-
/// confidence extractions.
std::optional<ExtractorQuality> estimate_extractor_quality(std::span<const std::pair<double, double>> conf_and_correctness,
                                                           double scope_correctness);

/// Dense parameter state indexed by store ids.
struct DenseQuality {
  std::vector<double> A;  // per SourceId
  std::vector<double> P, R, Q;  // per ExtractorId
};

/// Defaults overridden by whatever `initial` supplies. Q comes from `initial`
/// when present, else from derive_q when P is supplied, else default_Q.
DenseQuality initial_quality(const ObservationStore& store, const FusionConfig& config,
                             const QualityParams* initial);

/// C-step over every group of the store.
std::vector<double> correctness_step(const ObservationStore& store, const DenseQuality& quality,
                                     std::span<const double> alpha, const FusionConfig& config);

/// V-step over every item of the store.
std::vector<ItemPosterior> value_step(const ObservationStore& store, std::span<const double> correctness,
                                      std::span<const double> accuracy, const FusionConfig& config);

struct Result {
  std::vector<double> correctness;  // per GroupId, p(C_wdv = 1 | X)
  std::vector<double> alpha;        // per GroupId, prior used in the last C-step
  std::vector<ItemPosterior> items;  // per ItemId

  DenseQuality quality;
  std::vector<bool> source_supported;     // estimable and overlapping another source
  std::vector<bool> extractor_supported;  // has a positive-confidence extraction
  std::vector<bool> item_covered;         // provided by some supported source

  std::vector<IterationLog> log;

  /// Keyed view of the estimated parameters, supported entries only.
  QualityParams keyed_quality(const ObservationStore& store) const;
};

/// Alternates C-step, V-step, source-accuracy and extractor-quality M-steps
/// for up to t_max iterations.
Result multilayer_em(const ObservationStore& store, const FusionConfig& config,
                     const QualityParams* initial = nullptr);

}  // namespace multi
}  // namespace kbt
