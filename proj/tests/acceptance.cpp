// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "kbtrust/granularity.hpp"
#include "kbtrust/multi_layer.hpp"
#include "kbtrust/pipeline.hpp"
#include "kbtrust/single_layer.hpp"
#include "kbtrust/synthgen.hpp"

namespace fs = std::filesystem;
using namespace kbt;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch() {
  static const fs::path dir = fs::temp_directory_path() / ("kbtrust_acceptance_" + std::to_string(::getpid()));
  return dir;
}

// ---------------------------------------------------------------------------

void worked_examples() {
  const auto t0 = Clock::now();
  const double eps = 1e-6;
  bool ok = true;
  std::ostringstream detail;

  const auto quality = fixtures::obama_quality(0.6);
  const auto votes = multi::compute_votes(quality, eps);
  const double pre[] = {4.6, 3.9, 2.8, 0.4, 0.0};
  const double abs[] = {-4.6, -0.7, -4.5, -0.15, 0.0};
  double worst_vote = 0;
  for (int e = 0; e < 5; ++e) {
    const auto key = fixtures::extractor("E" + std::to_string(e + 1));
    worst_vote = std::max({worst_vote, std::abs(votes.pre.at(key) - pre[e]), std::abs(votes.abs.at(key) - abs[e])});
  }
  ok = ok && worst_vote <= 0.05;
  detail << "votes max err " << fmt("%.3f", worst_vote);

  const auto store = build_store(fixtures::obama_records());
  FusionConfig config;
  config.n_multi = 10;
  const auto dense = multi::initial_quality(store, config, &quality);
  const std::vector<double> alpha(store.groups().size(), 0.5);
  const auto c = multi::correctness_step(store, dense, alpha, config);
  const ItemId d = *store.find_item(fixtures::kObama);
  auto at = [&](const char* page, const char* value) {
    return c[*store.find_group(*store.find_source(fixtures::page(page)), d, *store.find_value(value))];
  };
  const double w1 = at("W1", "USA"), w6 = at("W6", "USA"), w7 = at("W7", "Kenya"), w8 = at("W8", "Kenya");
  ok = ok && w1 >= 0.99 && w6 <= 0.01 && std::abs(w7 - 0.07) <= 0.01 && w8 <= 0.01;
  detail << "; C W1=" << fmt("%.3f", w1) << " W6=" << fmt("%.3f", w6) << " W7=" << fmt("%.3f", w7)
         << " W8=" << fmt("%.3f", w8);

  std::vector<multi::Provision> provisions;
  for (int i = 0; i < 4; ++i) provisions.push_back({0, 1.0, 0.6});
  for (int i = 0; i < 2; ++i) provisions.push_back({1, 1.0, 0.6});
  const auto v = multi::value_posterior(provisions, 2, 10, eps);
  const bool residual_ok = v.unobserved == 9 &&
                           std::abs(v.residual_each * 9 - (1 - v.probs[0] - v.probs[1])) <= 1e-12;
  ok = ok && std::abs(v.probs[0] - 0.995) <= 0.001 && std::abs(v.probs[1] - 0.004) <= 0.001 && residual_ok;
  detail << "; V USA=" << fmt("%.4f", v.probs[0]) << " Kenya=" << fmt("%.4f", v.probs[1]);

  const double alpha2 = multi::update_alpha(0.004, 0.6, eps);
  std::vector<multi::Evidence> w7_evidence;
  for (int e = 1; e <= 5; ++e) {
    const auto key = fixtures::extractor("E" + std::to_string(e));
    w7_evidence.push_back({multi::compute_vote(quality.R.at(key), quality.Q.at(key), eps), (e == 3 || e == 5) ? 1.0 : 0.0});
  }
  const double again = multi::extraction_posterior(w7_evidence, alpha2, eps);
  ok = ok && std::abs(alpha2 - 0.40) <= 0.01 && again >= 0.04 && again <= 0.05;
  detail << "; alpha'=" << fmt("%.3f", alpha2) << " C'=" << fmt("%.3f", again);

  const double q3 = multi::derive_q(0.85, 0.99, 0.25, eps), q4 = multi::derive_q(0.33, 0.33, 0.25, eps),
               q5 = multi::derive_q(0.25, 0.17, 0.25, eps);
  ok = ok && std::abs(q3 - 0.06) <= 0.01 && std::abs(q4 - 0.22) <= 0.01 && std::abs(q5 - 0.17) <= 0.01;
  detail << "; Q E3/E4/E5=" << fmt("%.3f", q3) << "/" << fmt("%.3f", q4) << "/" << fmt("%.3f", q5);
  detail << "; " << fmt("%.3f", seconds_since(t0)) << " s";
  report(ok, "worked examples", detail.str());
}

void split_and_merge() {
  const auto t0 = Clock::now();
  std::vector<granularity::Unit<SourceKey>> pages;
  for (int i = 0; i < 1000; ++i) {
    const std::string p = "P" + std::to_string(i);
    pages.push_back({{"W", p, "URL" + std::to_string(i), std::nullopt}, "s" + std::to_string(i) + "|" + p});
  }
  const auto big = granularity::split_and_merge<SourceKey>(pages, 5, 500, 0);
  bool ok = big.nodes.size() == 2;
  for (const auto& n : big.nodes) ok = ok && n.size == 500;

  std::vector<granularity::Unit<SourceKey>> small;
  for (const char* p : {"gender", "birth", "spouse"}) {
    for (int i = 0; i < 2; ++i) small.push_back({{"website1.com", p, std::nullopt, std::nullopt}, p + std::to_string(i)});
  }
  const auto merged = granularity::split_and_merge<SourceKey>(small, 5, 500, 0);
  ok = ok && merged.nodes.size() == 1 && merged.nodes[0].size == 6 && merged.nodes[0].key == SourceKey{"website1.com"};
  const double secs = seconds_since(t0);
  ok = ok && secs < 1.0;
  std::ostringstream detail;
  detail << "1000 pages -> " << big.nodes.size() << " sources";
  for (const auto& n : big.nodes) detail << " " << n.size;
  detail << "; 3x2 -> " << merged.nodes.size() << " source of " << (merged.nodes.empty() ? 0 : merged.nodes[0].size)
         << "; " << fmt("%.3f", secs) << " s";
  report(ok, "split and merge", detail.str());
}

struct Scores {
  std::optional<double> sqv, sqa, sqc, cov;
};

Scores fuse_and_score(const synth::Dataset& data, pipeline::Model model) {
  pipeline::FuseOptions options;
  options.model = model;
  const auto files = pipeline::fuse(build_store(data.records), options);
  const fs::path dir = scratch() / "fuse";
  fs::remove_all(dir);
  pipeline::commit(dir, files);
  const auto r = pipeline::evaluate(pipeline::read_predictions(dir), &data.truth, nullptr);
  return {r.sqv, r.sqa, r.sqc, r.cov};
}

void synthetic_study() {
  const auto t0 = Clock::now();
  std::vector<double> sqv[2], sqa[2];
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    synth::SynthConfig sc;
    sc.seed = seed;
    const auto data = synth::generate(sc);
    for (int m = 0; m < 2; ++m) {
      const auto s = fuse_and_score(data, m == 0 ? pipeline::Model::kSingle : pipeline::Model::kMulti);
      sqv[m].push_back(s.sqv.value_or(NAN));
      sqa[m].push_back(s.sqa.value_or(NAN));
    }
  }
  const double secs = seconds_since(t0);
  const double v0 = fixtures::mean(sqv[0]), v1 = fixtures::mean(sqv[1]);
  const double a0 = fixtures::mean(sqa[0]), a1 = fixtures::mean(sqa[1]);
  std::ostringstream detail;
  detail << "SqV single " << fmt("%.4f", v0) << " multi " << fmt("%.4f", v1) << "; SqA single " << fmt("%.4f", a0)
         << " multi " << fmt("%.4f", a1) << " (need <= " << fmt("%.4f", 0.8 * a0) << "); " << fmt("%.1f", secs) << " s";
  report(v1 < v0 && a1 <= 0.8 * a0 && secs < 60.0, "synthetic study, multi vs single", detail.str());
}

// Non-increasing within one standard error of the difference of adjacent means.
void trend(const char* name, void (*set)(synth::SynthConfig&, double)) {
  const auto t0 = Clock::now();
  std::vector<double> means, errors;
  for (int i = 1; i <= 9; ++i) {
    std::vector<double> sqv;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      synth::SynthConfig sc;
      sc.seed = seed;
      set(sc, i / 10.0);
      sqv.push_back(fuse_and_score(synth::generate(sc), pipeline::Model::kMulti).sqv.value_or(NAN));
    }
    means.push_back(fixtures::mean(sqv));
    errors.push_back(fixtures::standard_error(sqv));
  }
  bool ok = true;
  std::ostringstream detail;
  detail << "SqV";
  for (std::size_t i = 0; i < means.size(); ++i) {
    detail << " " << fmt("%.3f", means[i]);
    if (i > 0 && means[i] - means[i - 1] > std::hypot(errors[i], errors[i - 1])) {
      ok = false;
      detail << "(+" << fmt("%.3f", means[i] - means[i - 1]) << ">" << fmt("%.3f", std::hypot(errors[i], errors[i - 1]))
             << ")";
    }
  }
  detail << "; " << fmt("%.1f", seconds_since(t0)) << " s";
  report(ok, name, detail.str());
}

void oracles() {
  std::mt19937_64 rng(2024);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const double eps = 1e-6;

  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = uniform(0.02, 0.98);
    std::vector<fixtures::ScopedExtractor> scoped;
    std::vector<multi::Evidence> evidence;
    for (int e = integer(1, 5); e > 0; --e) {
      const double R = uniform(0.01, 0.99), Q = uniform(0.01, 0.99);
      const bool x = integer(0, 1) == 1;
      scoped.push_back({R, Q, x});
      evidence.push_back({multi::compute_vote(R, Q, eps), x ? 1.0 : 0.0});
    }
    worst = std::max(worst, std::abs(multi::extraction_posterior(evidence, alpha, eps) -
                                     fixtures::bayes_correctness(scoped, alpha)));
  }
  report(worst <= 1e-9, "oracle: extraction correctness vs Bayes' rule", "max |diff| " + fmt("%.2e", worst) + " over 1000");

  worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = integer(1, 4);
    const int n = integer(std::max(1, static_cast<int>(k) - 1), 8);
    std::vector<ExtractionRecord> records;
    std::map<single::PairSourceKey, double> initial;
    const int sources = integer(1, 5);
    for (int s = 0; s < sources; ++s) {
      const SourceKey w{"w" + std::to_string(s) + ".com"};
      records.push_back({{"E"}, w, {"s", "p"}, "v" + std::to_string(integer(0, static_cast<int>(k) - 1)), 1.0});
      initial[{w, {"E"}}] = uniform(0.05, 0.95);
    }
    const auto store = build_store(records);
    FusionConfig config;
    config.t_max = 1;
    config.n_single = n;
    const auto result = single::single_layer_em(store, config, &initial);
    std::vector<std::pair<std::size_t, double>> claims;
    for (const auto& r : records) claims.emplace_back(*store.find_value(r.v), initial.at({r.w, r.e}));
    const std::size_t observed = store.values().size();
    const auto brute = fixtures::brute_force_accu(claims, observed, n);
    for (ValueId v = 0; v < observed; ++v) worst = std::max(worst, std::abs(result.items[0].prob(v) - brute[v]));
    if (observed < brute.size()) worst = std::max(worst, std::abs(result.items[0].residual_each - brute.back()));
  }
  report(worst <= 1e-9, "oracle: single-layer E-step vs enumeration", "max |diff| " + fmt("%.2e", worst) + " over 1000");

  worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ExtractionRecord> records;
    for (int w = 0; w < 5; ++w) {
      for (int d = 0; d < 12; ++d) {
        if (integer(0, 4) == 0) continue;
        const int v = integer(0, 9) < 6 ? 0 : integer(1, 3);
        records.push_back({{"E"}, {"w" + std::to_string(w) + ".com", "p", std::nullopt, std::nullopt},
                           {"s" + std::to_string(d), "p"}, "v" + std::to_string(v), 1.0});
      }
    }
    const auto store = build_store(records);
    FusionConfig config;
    config.clamp_eps = 1e-12;
    config.n_single = config.n_multi = 10;
    QualityParams perfect;
    perfect.P[{"E"}] = 1.0;
    perfect.R[{"E"}] = 1.0;
    const auto m = multi::multilayer_em(store, config, &perfect);
    const auto s = single::single_layer_em(store, config);
    for (ItemId d = 0; d < store.items().size(); ++d) {
      for (GroupId g : store.item_groups(d)) {
        const ValueId v = store.groups()[g].v;
        worst = std::max(worst, std::abs(m.items[d].prob(v) - s.items[d].prob(v)));
      }
    }
  }
  report(worst <= 1e-6, "oracle: perfect extractors reduce to single-layer", "max |diff| " + fmt("%.2e", worst));
}

void metric_suite() {
  bool ok = true;
  std::ostringstream detail;
  ok = ok && *metrics::square_loss(std::map<int, double>{{1, 1.0}, {2, 0.0}}, std::map<int, double>{{1, 1.0}, {2, 0.0}}) == 0.0;
  const double l1 = *metrics::square_loss(std::map<int, double>{{1, 0.6}}, std::map<int, double>{{1, 1.0}});
  const double l2 = *metrics::square_loss(std::map<int, double>{{1, 0.5}, {2, 0.5}}, std::map<int, double>{{1, 1.0}, {2, 0.0}});
  ok = ok && std::abs(l1 - 0.16) <= 1e-12 && l2 == 0.25;
  detail << "losses " << fmt("%.2f", l1) << " " << fmt("%.2f", l2);

  std::vector<std::pair<double, bool>> certain(10, {1.0, true}), coin, wrong(10, {0.95, false});
  for (int i = 0; i < 10; ++i) coin.emplace_back(0.5, i % 2 == 0);
  const double d1 = metrics::calibration(certain)->wdev, d2 = metrics::calibration(coin)->wdev,
               d3 = metrics::calibration(wrong)->wdev;
  ok = ok && d1 == 0.0 && std::abs(d2) <= 1e-12 && std::abs(d3 - 0.9025) <= 1e-12;
  detail << "; wdev " << fmt("%.4f", d1) << " " << fmt("%.4f", d2) << " " << fmt("%.4f", d3);

  const std::vector<std::pair<double, bool>> perfect = {{0.9, true}, {0.7, true}, {0.2, false}};
  std::vector<std::pair<double, bool>> flat, reversed;
  for (int i = 0; i < 8; ++i) flat.emplace_back(0.4, i < 3);
  for (int i = 0; i < 9; ++i) reversed.emplace_back(0.9 - 0.05 * i, false);
  reversed.emplace_back(0.01, true);
  const double auc1 = metrics::pr_curve(perfect)->auc, auc2 = metrics::pr_curve(flat)->auc;
  double auc_worst = std::abs(metrics::pr_curve(reversed)->auc - fixtures::brute_force_auc_pr(reversed));
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<double, bool>> s;
    for (int i = 0; i < 1 + static_cast<int>(rng() % 40); ++i) s.emplace_back((rng() % 10) / 10.0, rng() % 3 == 0);
    s.emplace_back((rng() % 10) / 10.0, true);
    auc_worst = std::max(auc_worst, std::abs(metrics::pr_curve(s)->auc - fixtures::brute_force_auc_pr(s)));
  }
  ok = ok && std::abs(auc1 - 1.0) <= 1e-9 && std::abs(auc2 - 3.0 / 8.0) <= 1e-9 && auc_worst <= 1e-9;
  detail << "; auc " << fmt("%.3f", auc1) << " " << fmt("%.3f", auc2) << " oracle |diff| " << fmt("%.1e", auc_worst);

  const double c1 = *metrics::coverage(4, 4), c2 = *metrics::coverage(3, 4);
  ok = ok && c1 == 1.0 && c2 == 0.75;

  synth::SynthConfig sc;
  sc.seed = 1;
  const auto data = synth::generate(sc);
  detail << "; synthetic Cov";
  for (auto [name, model] : {std::pair{"single", pipeline::Model::kSingle}, std::pair{"multi", pipeline::Model::kMulti},
                             std::pair{"multi-sm", pipeline::Model::kMultiSm}}) {
    const auto cov = fuse_and_score(data, model).cov;
    ok = ok && cov && *cov == 1.0;
    detail << " " << name << "=" << fmt("%.3f", cov.value_or(NAN));
  }
  report(ok, "metric suite", detail.str());
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + KBTRUST_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism() {
  const fs::path base = scratch() / "determinism";
  bool ok = run("synth --seed 9 --out-dir " + (base / "data").string()) == 0;
  std::ostringstream detail;
  for (const char* model : {"single", "multi", "multi-sm"}) {
    const std::string common = "fuse --model " + std::string(model) + " --input " + (base / "data" / "records.jsonl").string();
    const fs::path a = base / (std::string(model) + "_w1"), b = base / (std::string(model) + "_w4");
    ok = ok && run(common + " --workers 1 --out-dir " + a.string()) == 0;
    ok = ok && run(common + " --workers 4 --out-dir " + b.string()) == 0;
    std::size_t same = 0, total = 0;
    if (fs::exists(a)) {
      for (const auto& entry : fs::directory_iterator(a)) {
        ++total;
        const fs::path other = b / entry.path().filename();
        if (fs::exists(other) && pipeline::read_file(entry.path()) == pipeline::read_file(other)) ++same;
      }
    }
    ok = ok && total > 0 && same == total;
    detail << model << " " << same << "/" << total << " identical; ";
  }
  report(ok, "determinism across worker counts", detail.str());
}

}  // namespace

int main() {
  fs::create_directories(scratch());
  try {
    worked_examples();
    split_and_merge();
    synthetic_study();
    trend("trend: SqV over extractor recall", [](synth::SynthConfig& c, double x) { c.R = x; });
    trend("trend: SqV over source accuracy", [](synth::SynthConfig& c, double x) { c.A = x; });
    oracles();
    metric_suite();
    determinism();
  } catch (const std::exception& e) {
    report(false, "acceptance run", e.what());
  }
  std::error_code ec;
  fs::remove_all(scratch(), ec);
  std::printf("%d failing\n", failures);
  return failures == 0 ? 0 : 1;
}
