#include "kbtrust/multi_layer.hpp"

#include <algorithm>
#include <cmath>

#include "kbtrust/parallel.hpp"

namespace kbt::multi {

double derive_q(double precision, double recall, double gamma, double eps) {
  const double p = clamp(precision, eps);
  const double r = clamp(recall, eps);
  return clamp(gamma / (1.0 - gamma) * (1.0 - p) / p * r, eps);
}

Vote compute_vote(double recall, double q, double eps) {
  const double r = clamp(recall, eps);
  const double qc = clamp(q, eps);
  return {std::log(r) - std::log(qc), std::log1p(-r) - std::log1p(-qc)};
}

VoteWeights compute_votes(const QualityParams& quality, double eps) {
  VoteWeights out;
  for (const auto& [key, r] : quality.R) {
    auto q = quality.Q.find(key);
    if (q == quality.Q.end()) continue;
    const Vote v = compute_vote(r, q->second, eps);
    out.pre.emplace(key, v.pre);
    out.abs.emplace(key, v.abs);
  }
  return out;
}

double vote_count(std::span<const Evidence> scoped, const std::optional<double>& threshold) {
  double total = 0.0;
  for (const Evidence& ev : scoped) {
    const double c = effective_confidence(ev.confidence, threshold);
    total += c * ev.vote.pre + (1.0 - c) * ev.vote.abs;
  }
  return total;
}

double extraction_posterior(std::span<const Evidence> scoped, double alpha, double eps,
                            const std::optional<double>& threshold) {
  if (scoped.empty()) return alpha;
  return sigmoid(vote_count(scoped, threshold) + logit(clamp(alpha, eps)));
}

ItemPosterior value_posterior(std::span<const Provision> provisions, std::size_t k, int n, double eps) {
  std::vector<double> scores(k, 0.0);
  for (const Provision& p : provisions) {
    const double a = clamp(p.accuracy, eps);
    scores[p.candidate] += p.correctness * std::log(n * a / (1.0 - a));
  }
  ItemPosterior out;
  normalize_with_residual(scores, n, out.probs, out.residual_each, out.unobserved);
  return out;
}

double update_alpha(double value_prob, double accuracy, double eps) {
  return clamp(value_prob * accuracy + (1.0 - value_prob) * (1.0 - accuracy), eps);
}

std::optional<double> estimate_source_accuracy(std::span<const std::pair<double, double>> correctness_and_truth) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& [c, pv] : correctness_and_truth) {
    if (c <= 0.0) continue;
    num += c * pv;
    den += c;
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

std::optional<ExtractorQuality> estimate_extractor_quality(std::span<const std::pair<double, double>> conf_and_correctness,
                                                           double scope_correctness) {
  double num = 0.0;
  double conf_total = 0.0;
  for (const auto& [conf, c] : conf_and_correctness) {
    if (conf <= 0.0) continue;
    num += conf * c;
    conf_total += conf;
  }
  if (conf_total <= 0.0) return std::nullopt;
  ExtractorQuality q;
  q.precision = num / conf_total;
  q.recall = scope_correctness > 0.0 ? std::min(1.0, num / scope_correctness) : 0.0;
  return q;
}

DenseQuality initial_quality(const ObservationStore& store, const FusionConfig& config,
                             const QualityParams* initial) {
  const double eps = config.clamp_eps;
  DenseQuality q;
  q.A.assign(store.sources().size(), config.default_A);
  q.P.assign(store.extractors().size(), config.default_P());
  q.R.assign(store.extractors().size(), config.default_R);
  q.Q.assign(store.extractors().size(), config.default_Q);
  if (!initial) return q;

  for (SourceId w = 0; w < q.A.size(); ++w) {
    if (auto it = initial->A.find(store.sources()[w]); it != initial->A.end()) q.A[w] = clamp(it->second, eps);
  }
  for (ExtractorId e = 0; e < q.P.size(); ++e) {
    const ExtractorKey& key = store.extractors()[e];
    auto p = initial->P.find(key);
    auto r = initial->R.find(key);
    auto qq = initial->Q.find(key);
    if (p != initial->P.end()) q.P[e] = clamp(p->second, eps);
    if (r != initial->R.end()) q.R[e] = clamp(r->second, eps);
    if (qq != initial->Q.end()) {
      q.Q[e] = clamp(qq->second, eps);
    } else if (p != initial->P.end()) {
      q.Q[e] = derive_q(q.P[e], q.R[e], config.gamma, eps);
    }
  }
  return q;
}

std::vector<double> correctness_step(const ObservationStore& store, const DenseQuality& quality,
                                     std::span<const double> alpha, const FusionConfig& config) {
  const double eps = config.clamp_eps;
  const std::size_t n_extractors = store.extractors().size();
  std::vector<Vote> votes(n_extractors);
  for (ExtractorId e = 0; e < n_extractors; ++e) votes[e] = compute_vote(quality.R[e], quality.Q[e], eps);

  // Absence votes of everything in scope; extracting extractors are then
  // corrected by conf * (pre - abs).
  const std::size_t n_scopes = store.scopes().size();
  std::vector<double> scope_absence(n_scopes, 0.0);
  parallel_for(n_scopes, config.workers, [&](std::size_t s) {
    double total = 0.0;
    for (ExtractorId e : store.scope_extractors(static_cast<ScopeId>(s))) total += votes[e].abs;
    scope_absence[s] = total;
  });

  const auto groups = store.groups();
  std::vector<double> out(groups.size());
  parallel_for(groups.size(), config.workers, [&](std::size_t g) {
    const Group& group = groups[g];
    if (store.scope_extractors(group.scope).empty()) {
      out[g] = alpha[g];
      return;
    }
    double vcc = scope_absence[group.scope];
    for (const Record& r : store.group_records(static_cast<GroupId>(g))) {
      const double c = effective_confidence(r.confidence, config.confidence_threshold);
      vcc += c * (votes[r.e].pre - votes[r.e].abs);
    }
    out[g] = sigmoid(vcc + logit(clamp(alpha[g], eps)));
  });
  return out;
}

std::vector<ItemPosterior> value_step(const ObservationStore& store, std::span<const double> correctness,
                                      std::span<const double> accuracy, const FusionConfig& config) {
  const auto groups = store.groups();
  std::vector<ItemPosterior> items(store.items().size());
  parallel_for(items.size(), config.workers, [&](std::size_t d) {
    std::vector<ValueId> values;
    std::vector<Provision> provisions;
    for (GroupId g : store.item_groups(static_cast<ItemId>(d))) {
      if (values.empty() || values.back() != groups[g].v) values.push_back(groups[g].v);
      provisions.push_back({values.size() - 1, correctness[g], accuracy[groups[g].w]});
    }
    items[d] = value_posterior(provisions, values.size(), config.n_multi, config.clamp_eps);
    items[d].values = std::move(values);
  });
  return items;
}

QualityParams Result::keyed_quality(const ObservationStore& store) const {
  QualityParams out;
  for (SourceId w = 0; w < quality.A.size(); ++w) {
    if (source_supported[w]) out.A.emplace(store.sources()[w], quality.A[w]);
  }
  for (ExtractorId e = 0; e < quality.P.size(); ++e) {
    if (!extractor_supported[e]) continue;
    const ExtractorKey& key = store.extractors()[e];
    out.P.emplace(key, quality.P[e]);
    out.R.emplace(key, quality.R[e]);
    out.Q.emplace(key, quality.Q[e]);
  }
  return out;
}

namespace {

// Position of each group's value among its item's candidates.
std::vector<std::uint32_t> candidate_index(const ObservationStore& store) {
  const auto groups = store.groups();
  std::vector<std::uint32_t> out(groups.size());
  for (ItemId d = 0; d < store.items().size(); ++d) {
    std::uint32_t idx = 0;
    ValueId prev = 0;
    bool first = true;
    for (GroupId g : store.item_groups(d)) {
      if (!first && groups[g].v != prev) ++idx;
      out[g] = idx;
      prev = groups[g].v;
      first = false;
    }
  }
  return out;
}

}  // namespace

Result multilayer_em(const ObservationStore& store, const FusionConfig& config, const QualityParams* initial) {
  config.validate();
  Result out;
  if (store.empty()) return out;

  const double eps = config.clamp_eps;
  const auto groups = store.groups();
  const auto records = store.records();
  const std::size_t n_sources = store.sources().size();
  const std::size_t n_extractors = store.extractors().size();
  const std::size_t n_scopes = store.scopes().size();

  std::vector<GroupId> record_group(records.size());
  for (GroupId g = 0; g < groups.size(); ++g) {
    for (RecordId r = groups[g].first; r < groups[g].last; ++r) record_group[r] = g;
  }
  const auto group_candidate = candidate_index(store);

  out.quality = initial_quality(store, config, initial);
  out.alpha.assign(groups.size(), clamp(config.alpha0, eps));
  // Written from worker threads, so not vector<bool>.
  std::vector<std::uint8_t> source_estimated(n_sources, 0);
  std::vector<std::uint8_t> extractor_estimated(n_extractors, 0);

  for (int t = 1; t <= config.t_max; ++t) {
    out.correctness = correctness_step(store, out.quality, out.alpha, config);

    std::vector<double> used = out.correctness;
    if (config.hard_map) {
      for (double& c : used) c = c >= 0.5 ? 1.0 : 0.0;
    }

    out.items = value_step(store, used, out.quality.A, config);

    DenseQuality next = out.quality;
    parallel_for(n_sources, config.workers, [&](std::size_t w) {
      std::vector<std::pair<double, double>> entries;
      for (GroupId g : store.source_groups(static_cast<SourceId>(w))) {
        entries.emplace_back(used[g], out.items[groups[g].d].probs[group_candidate[g]]);
      }
      if (auto a = estimate_source_accuracy(entries)) {
        next.A[w] = clamp(*a, eps);
        source_estimated[w] = 1;
      }
    });

    std::vector<double> scope_total(n_scopes, 0.0);
    parallel_for(n_scopes, config.workers, [&](std::size_t s) {
      double total = 0.0;
      for (GroupId g : store.scope_groups(static_cast<ScopeId>(s))) total += used[g];
      scope_total[s] = total;
    });

    parallel_for(n_extractors, config.workers, [&](std::size_t e) {
      std::vector<std::pair<double, double>> entries;
      for (RecordId r : store.extractor_records(static_cast<ExtractorId>(e))) {
        entries.emplace_back(effective_confidence(records[r].confidence, config.confidence_threshold),
                             used[record_group[r]]);
      }
      double scope_correctness = 0.0;
      for (ScopeId s : store.extractor_scopes(static_cast<ExtractorId>(e))) scope_correctness += scope_total[s];
      if (auto q = estimate_extractor_quality(entries, scope_correctness)) {
        next.P[e] = clamp(q->precision, eps);
        next.R[e] = clamp(q->recall, eps);
        next.Q[e] = derive_q(next.P[e], next.R[e], config.gamma, eps);
        extractor_estimated[e] = 1;
      }
    });

    IterationLog entry;
    entry.iteration = t;
    auto track = [&](const std::vector<double>& before, const std::vector<double>& after, double& mean) {
      for (std::size_t i = 0; i < before.size(); ++i) {
        entry.max_delta = std::max(entry.max_delta, std::abs(after[i] - before[i]));
        mean += after[i];
      }
      if (!after.empty()) mean /= static_cast<double>(after.size());
    };
    double unused = 0.0;
    track(out.quality.A, next.A, entry.mean_accuracy);
    track(out.quality.P, next.P, entry.mean_precision);
    track(out.quality.R, next.R, entry.mean_recall);
    track(out.quality.Q, next.Q, unused);
    out.quality = std::move(next);
    out.log.push_back(entry);
    if (entry.max_delta < config.convergence_tol) break;

    // The prior used from iteration prior_update_start_iter onward comes from
    // the previous iteration's V and A.
    if (!config.freeze_alpha && t + 1 >= config.prior_update_start_iter && t < config.t_max) {
      parallel_for(groups.size(), config.workers, [&](std::size_t g) {
        const double pv = out.items[groups[g].d].probs[group_candidate[g]];
        out.alpha[g] = update_alpha(pv, out.quality.A[groups[g].w], eps);
      });
    }
  }

  // Support: a source must have an estimate and share an item with another
  // source; otherwise its accuracy only echoes its own default.
  std::vector<bool> item_shared(store.items().size(), false);
  for (ItemId d = 0; d < store.items().size(); ++d) {
    auto gs = store.item_groups(d);
    for (std::size_t i = 1; i < gs.size() && !item_shared[d]; ++i) {
      if (groups[gs[i]].w != groups[gs[0]].w) item_shared[d] = true;
    }
  }
  out.source_supported.assign(n_sources, false);
  for (SourceId w = 0; w < n_sources; ++w) {
    if (!source_estimated[w]) continue;
    for (GroupId g : store.source_groups(w)) {
      if (item_shared[groups[g].d]) {
        out.source_supported[w] = true;
        break;
      }
    }
  }
  out.extractor_supported.assign(extractor_estimated.begin(), extractor_estimated.end());
  out.item_covered.assign(store.items().size(), false);
  for (const Group& g : groups) {
    if (out.source_supported[g.w]) out.item_covered[g.d] = true;
  }
  return out;
}

}  // namespace kbt::multi
