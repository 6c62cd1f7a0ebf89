#include "kbtrust/single_layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kbtrust/parallel.hpp"

namespace kbt::single {

ItemPosterior accu_value_posterior(std::span<const Claim> claims, std::size_t k, int n, double eps) {
  std::vector<double> scores(k, 0.0);
  for (const Claim& c : claims) {
    const double a = clamp(c.accuracy, eps);
    scores[c.candidate] += std::log(n * a / (1.0 - a));
  }
  ItemPosterior out;
  normalize_with_residual(scores, n, out.probs, out.residual_each, out.unobserved);
  return out;
}

std::vector<double> popularity_false_share(std::span<const std::size_t> claim_counts,
                                           std::optional<std::size_t> truth, int n) {
  std::vector<double> share(claim_counts.size(), 0.0);
  std::size_t false_candidates = 0;
  double false_claims = 0.0;
  for (std::size_t i = 0; i < claim_counts.size(); ++i) {
    if (truth && *truth == i) continue;
    ++false_candidates;
    false_claims += static_cast<double>(claim_counts[i]);
  }
  if (false_candidates == 0 || false_claims == 0.0) return share;
  const double mass = static_cast<double>(std::min<std::size_t>(false_candidates, static_cast<std::size_t>(n))) / n;
  for (std::size_t i = 0; i < claim_counts.size(); ++i) {
    if (truth && *truth == i) continue;
    share[i] = mass * static_cast<double>(claim_counts[i]) / false_claims;
  }
  return share;
}

ItemPosterior popaccu_value_posterior(std::span<const Claim> claims, std::size_t k, int n, double eps) {
  std::vector<std::size_t> counts(k, 0);
  for (const Claim& c : claims) ++counts[c.candidate];

  auto log_likelihood = [&](std::optional<std::size_t> truth) {
    const auto share = popularity_false_share(counts, truth, n);
    double ll = 0.0;
    for (const Claim& c : claims) {
      const double a = clamp(c.accuracy, eps);
      if (truth && *truth == c.candidate) {
        ll += std::log(a);
      } else {
        ll += std::log1p(-a) + std::log(share[c.candidate]);
      }
    }
    return ll;
  };

  const double unobserved_ll = log_likelihood(std::nullopt);
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i) scores[i] = log_likelihood(i) - unobserved_ll;
  ItemPosterior out;
  normalize_with_residual(scores, n, out.probs, out.residual_each, out.unobserved);
  return out;
}

std::optional<double> accu_source_accuracy(std::span<const double> claimed_posteriors) {
  if (claimed_posteriors.empty()) return std::nullopt;
  double sum = 0.0;
  for (double p : claimed_posteriors) sum += p;
  return sum / static_cast<double>(claimed_posteriors.size());
}

std::optional<std::size_t> Result::find(const PairSource& s) const {
  auto it = std::lower_bound(pair_sources.begin(), pair_sources.end(), s);
  if (it == pair_sources.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - pair_sources.begin());
}

Result single_layer_em(const ObservationStore& store, const FusionConfig& config,
                       const std::map<PairSourceKey, double>* initial) {
  config.validate();
  Result out;
  if (store.empty()) return out;
  const auto records = store.records();
  const auto groups = store.groups();
  const std::size_t n_items = store.items().size();
  const double eps = config.clamp_eps;
  const int n = config.n_single;

  // Any positive confidence counts as a claim.
  auto claims_it = [&](RecordId r) { return records[r].confidence > 0.0; };
  constexpr std::uint32_t kNoPair = ~std::uint32_t{0};

  for (RecordId r = 0; r < records.size(); ++r) {
    if (claims_it(r)) out.pair_sources.push_back({records[r].w, records[r].e});
  }
  std::sort(out.pair_sources.begin(), out.pair_sources.end());
  out.pair_sources.erase(std::unique(out.pair_sources.begin(), out.pair_sources.end()), out.pair_sources.end());
  const std::size_t n_pairs = out.pair_sources.size();

  std::vector<std::uint32_t> record_pair(records.size(), kNoPair);
  for (RecordId r = 0; r < records.size(); ++r) {
    if (claims_it(r)) record_pair[r] = static_cast<std::uint32_t>(*out.find({records[r].w, records[r].e}));
  }

  // Candidate index of each group within its item (item groups are ordered by value).
  std::vector<std::uint32_t> group_candidate(groups.size());
  std::vector<std::size_t> item_candidates(n_items, 0);
  out.items.resize(n_items);
  for (ItemId d = 0; d < n_items; ++d) {
    auto& post = out.items[d];
    for (GroupId g : store.item_groups(d)) {
      if (post.values.empty() || post.values.back() != groups[g].v) post.values.push_back(groups[g].v);
      group_candidate[g] = static_cast<std::uint32_t>(post.values.size() - 1);
    }
    item_candidates[d] = post.values.size();
  }

  // Claims of each pair source, as record ids in canonical order.
  std::vector<std::uint32_t> pair_offsets(n_pairs + 1, 0);
  for (auto p : record_pair) {
    if (p != kNoPair) ++pair_offsets[p + 1];
  }
  std::partial_sum(pair_offsets.begin(), pair_offsets.end(), pair_offsets.begin());
  std::vector<RecordId> pair_records(pair_offsets[n_pairs]);
  {
    std::vector<std::uint32_t> cursor(pair_offsets.begin(), pair_offsets.end() - 1);
    for (RecordId r = 0; r < records.size(); ++r) {
      if (record_pair[r] != kNoPair) pair_records[cursor[record_pair[r]]++] = r;
    }
  }
  std::vector<std::uint32_t> record_candidate(records.size());
  for (GroupId g = 0; g < groups.size(); ++g) {
    for (RecordId r = groups[g].first; r < groups[g].last; ++r) record_candidate[r] = group_candidate[g];
  }

  // Overlap: an item claimed by at least two pair sources.
  std::vector<bool> item_shared(n_items, false);
  for (ItemId d = 0; d < n_items; ++d) {
    std::vector<std::uint32_t> claimants;
    for (GroupId g : store.item_groups(d)) {
      for (RecordId r = groups[g].first; r < groups[g].last; ++r) {
        if (record_pair[r] != kNoPair) claimants.push_back(record_pair[r]);
      }
    }
    std::sort(claimants.begin(), claimants.end());
    item_shared[d] = std::adjacent_find(claimants.begin(), claimants.end(), std::not_equal_to<>()) != claimants.end();
  }
  out.supported.assign(n_pairs, false);
  for (RecordId r = 0; r < records.size(); ++r) {
    if (record_pair[r] != kNoPair && item_shared[records[r].d]) out.supported[record_pair[r]] = true;
  }

  out.accuracy.assign(n_pairs, config.default_A);
  if (initial) {
    for (std::size_t s = 0; s < n_pairs; ++s) {
      PairSourceKey key{store.sources()[out.pair_sources[s].w], store.extractors()[out.pair_sources[s].e]};
      if (auto it = initial->find(key); it != initial->end()) out.accuracy[s] = clamp(it->second, eps);
    }
  }

  auto e_step = [&](const std::vector<double>& accuracy) {
    parallel_for(n_items, config.workers, [&](std::size_t d) {
      std::vector<Claim> claims;
      for (GroupId g : store.item_groups(static_cast<ItemId>(d))) {
        for (RecordId r = groups[g].first; r < groups[g].last; ++r) {
          if (record_pair[r] != kNoPair) claims.push_back({group_candidate[g], accuracy[record_pair[r]]});
        }
      }
      ItemPosterior post = config.single_variant == SingleVariant::kPopAccu
                               ? popaccu_value_posterior(claims, item_candidates[d], n, eps)
                               : accu_value_posterior(claims, item_candidates[d], n, eps);
      post.values = std::move(out.items[d].values);
      out.items[d] = std::move(post);
    });
  };

  for (int t = 1; t <= config.t_max; ++t) {
    e_step(out.accuracy);

    std::vector<double> next(n_pairs);
    parallel_for(n_pairs, config.workers, [&](std::size_t s) {
      std::vector<double> claimed;
      for (std::uint32_t i = pair_offsets[s]; i < pair_offsets[s + 1]; ++i) {
        const RecordId r = pair_records[i];
        claimed.push_back(out.items[records[r].d].probs[record_candidate[r]]);
      }
      next[s] = accu_source_accuracy(claimed).value_or(out.accuracy[s]);
    });

    IterationLog entry;
    entry.iteration = t;
    for (std::size_t s = 0; s < n_pairs; ++s) {
      entry.max_delta = std::max(entry.max_delta, std::abs(next[s] - out.accuracy[s]));
      entry.mean_accuracy += next[s];
    }
    if (n_pairs > 0) entry.mean_accuracy /= static_cast<double>(n_pairs);
    out.accuracy = std::move(next);
    out.log.push_back(entry);
    if (entry.max_delta < config.convergence_tol) break;
  }

  out.item_covered.assign(n_items, false);
  for (RecordId r = 0; r < records.size(); ++r) {
    if (record_pair[r] != kNoPair && out.supported[record_pair[r]]) out.item_covered[records[r].d] = true;
  }

  const std::size_t n_sources = store.sources().size();
  out.source_accuracy.assign(n_sources, config.default_A);
  out.source_supported.assign(n_sources, false);
  out.source_triples.assign(n_sources, 0);
  for (SourceId w = 0; w < n_sources; ++w) {
    double sum = 0.0;
    std::size_t count = 0;
    for (GroupId g : store.source_groups(w)) {
      const double p = out.items[groups[g].d].probs[group_candidate[g]];
      for (RecordId r = groups[g].first; r < groups[g].last; ++r) {
        if (record_pair[r] == kNoPair) continue;
        sum += p;
        ++count;
        if (out.supported[record_pair[r]]) out.source_supported[w] = true;
      }
    }
    out.source_triples[w] = store.source_groups(w).size();
    if (count > 0) out.source_accuracy[w] = sum / static_cast<double>(count);
  }
  return out;
}

}  // namespace kbt::single
