#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kbtrust/store.hpp"

namespace kbt {

/// p(V_d = v | X) over the n+1-value domain of one data item.
struct ItemPosterior {
  std::vector<ValueId> values;  // observed candidates, ascending
  std::vector<double> probs;    // aligned with values
  double residual_each = 0.0;   // mass of each unobserved domain value
  std::size_t unobserved = 0;

  double prob(ValueId v) const;
  double total() const;
};

/// Normalizes per-candidate log-scores against (n+1-k) unobserved values that
/// score 0: p_i = exp(s_i) / (sum_j exp(s_j) + (n+1-k)).
///
/// When k exceeds n+1 no unobserved values remain and the candidates share
/// all of the mass.
void normalize_with_residual(std::span<const double> scores, int n, std::vector<double>& probs,
                             double& residual_each, std::size_t& unobserved);

struct IterationLog {
  int iteration = 0;
  double max_delta = 0.0;
  double mean_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

}  // namespace kbt
