#include "kbtrust/posterior.hpp"

#include <algorithm>
#include <cmath>

namespace kbt {

double ItemPosterior::prob(ValueId v) const {
  auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it != values.end() && *it == v) return probs[static_cast<std::size_t>(it - values.begin())];
  return residual_each;
}

double ItemPosterior::total() const {
  double sum = 0.0;
  for (double p : probs) sum += p;
  return sum + residual_each * static_cast<double>(unobserved);
}

void normalize_with_residual(std::span<const double> scores, int n, std::vector<double>& probs,
                             double& residual_each, std::size_t& unobserved) {
  const auto k = static_cast<long>(scores.size());
  unobserved = static_cast<std::size_t>(std::max<long>(0, static_cast<long>(n) + 1 - k));

  double top = unobserved > 0 ? 0.0 : -INFINITY;
  for (double s : scores) top = std::max(top, s);
  if (!std::isfinite(top)) top = 0.0;

  probs.resize(scores.size());
  double z = static_cast<double>(unobserved) * std::exp(-top);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - top);
    z += probs[i];
  }
  for (double& p : probs) p /= z;
  residual_each = unobserved > 0 ? std::exp(-top) / z : 0.0;
}

}  // namespace kbt
