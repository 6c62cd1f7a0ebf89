#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "kbtrust/posterior.hpp"
#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace kbt {

/// Baseline knowledge fusion: every (webpage, extractor) combination is one
/// data source with a single accuracy, and extracted triples are taken at
/// face value.
namespace single {

struct PairSource {
  SourceId w;
  ExtractorId e;

  auto operator<=>(const PairSource&) const = default;
};

struct PairSourceKey {
  SourceKey w;
  ExtractorKey e;

  auto operator<=>(const PairSourceKey&) const = default;
};

/// One claim on a data item: candidate index in [0, k) and claimant accuracy.
struct Claim {
  std::size_t candidate;
  double accuracy;
};

/// Accu posterior over k observed candidates plus (n+1-k) unobserved values,
/// uniform prior, independent sources.
ItemPosterior accu_value_posterior(std::span<const Claim> claims, std::size_t k, int n, double eps);

/// PopAccu posterior. A false claim lands on observed false candidate v with
/// probability (1-A) * pop(v | v*), where the observed false candidates keep
/// the share they would have under uniform allocation (k_false / n) but split
/// it in proportion to their claim counts.
ItemPosterior popaccu_value_posterior(std::span<const Claim> claims, std::size_t k, int n, double eps);

/// pop(v | v*) for every candidate v given true candidate `truth` (or
/// std::nullopt for an unobserved true value). Entry for `truth` is 0.
std::vector<double> popularity_false_share(std::span<const std::size_t> claim_counts,
                                           std::optional<std::size_t> truth, int n);

/// Mean posterior of the facts a source claims; nullopt when it claims none.
std::optional<double> accu_source_accuracy(std::span<const double> claimed_posteriors);

struct Result {
  std::vector<PairSource> pair_sources;  // ascending
  std::vector<double> accuracy;          // per pair source
  std::vector<bool> supported;           // overlaps with another pair source

  std::vector<ItemPosterior> items;  // per ItemId
  std::vector<bool> item_covered;    // some supported claimant

  /// Per web source: mean posterior over all triples extracted from it.
  std::vector<double> source_accuracy;
  std::vector<bool> source_supported;
  std::vector<std::size_t> source_triples;

  std::vector<IterationLog> log;

  std::optional<std::size_t> find(const PairSource& s) const;
};

/// Iterates the Accu E-step and the accuracy M-step from default_A (or the
/// given initial accuracies) for t_max rounds or until max |dA| < tol.
Result single_layer_em(const ObservationStore& store, const FusionConfig& config,
                       const std::map<PairSourceKey, double>* initial = nullptr);

}  // namespace single
}  // namespace kbt
