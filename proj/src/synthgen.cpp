#include "kbtrust/synthgen.hpp"

#include <istream>
#include <ostream>
#include <algorithm>
#include <random>

#include <json.hpp>

namespace kbt::synth {

namespace {

// Distribution helpers defined here rather than via <random> distributions,
// whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

std::string padded(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
  return buf;
}

constexpr int kPredicates = 5;

}  // namespace

void SynthConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(A) || !prob(delta) || !prob(R) || !prob(P_component)) {
    throw FusionError("synthetic probabilities must lie in [0, 1]");
  }
  if (n_sources < 1 || n_extractors < 1 || triples_per_source < 1 || domain_size < 1) {
    throw FusionError("synthetic counts must be positive");
  }
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Dataset out;
  GroundTruth& truth = out.truth;
  truth.nominal_A = config.A;
  truth.nominal_P = config.P_component * config.P_component * config.P_component;
  truth.nominal_R = config.R;

  const int n = config.domain_size;
  std::vector<DataItem> items;
  std::vector<int> true_index;
  for (int i = 0; i < config.triples_per_source; ++i) {
    items.push_back({padded("s", i), "p" + std::to_string(i % kPredicates)});
    true_index.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n) + 1)));
    truth.true_values[items.back()] = "v" + std::to_string(true_index.back());
  }

  // Provided value index per (source, item).
  std::vector<SourceKey> sources;
  std::vector<std::vector<int>> provided(config.n_sources);
  for (int w = 0; w < config.n_sources; ++w) {
    sources.push_back(SourceKey{padded("site", w), std::nullopt, std::nullopt, std::nullopt});
    int correct = 0;
    for (int i = 0; i < config.triples_per_source; ++i) {
      int v = true_index[i];
      if (!rng.bernoulli(config.A)) {
        int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        v = k >= true_index[i] ? k + 1 : k;
      } else {
        ++correct;
      }
      provided[w].push_back(v);
      truth.true_provisions.emplace(sources[w], items[i], "v" + std::to_string(v));
    }
    truth.true_A[sources[w]] = static_cast<double>(correct) / config.triples_per_source;
  }

  std::set<std::tuple<SourceKey, DataItem, Value>> extracted;
  for (int e = 0; e < config.n_extractors; ++e) {
    ExtractorKey key{padded("ext", e), std::nullopt, std::nullopt, std::nullopt, std::nullopt};
    extracted.clear();
    std::size_t covered_provisions = 0;
    std::size_t recalled = 0;
    for (int w = 0; w < config.n_sources; ++w) {
      if (!rng.bernoulli(config.delta)) continue;
      covered_provisions += static_cast<std::size_t>(config.triples_per_source);
      for (int i = 0; i < config.triples_per_source; ++i) {
        if (!rng.bernoulli(config.R)) continue;
        ++recalled;
        DataItem d = items[i];
        int v = provided[w][i];
        if (!rng.bernoulli(config.P_component)) d.subject = padded("xs", static_cast<int>(rng.below(n)));
        if (!rng.bernoulli(config.P_component)) d.predicate = "xp" + std::to_string(rng.below(n));
        if (!rng.bernoulli(config.P_component)) {
          // Another of the item's false values.
          const int lo = std::min(v, true_index[i]);
          const int hi = std::max(v, true_index[i]);
          const int pool = lo == hi ? n : n - 1;
          if (pool > 0) {
            int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(pool)));
            if (k >= lo) ++k;
            if (lo != hi && k >= hi) ++k;
            v = k;
          }
        }
        extracted.emplace(sources[w], d, "v" + std::to_string(v));
      }
    }
    std::size_t correct = 0;
    for (const auto& [w, d, v] : extracted) {
      out.records.push_back({key, w, d, v, 1.0});
      if (truth.true_provisions.count({w, d, v})) ++correct;
    }
    truth.true_P[key] = extracted.empty() ? 0.0 : static_cast<double>(correct) / extracted.size();
    truth.true_R[key] = covered_provisions == 0 ? 0.0 : static_cast<double>(recalled) / covered_provisions;
  }
  return out;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  nlohmann::ordered_json j;
  j["nominal"] = {{"A", truth.nominal_A}, {"P", truth.nominal_P}, {"R", truth.nominal_R}};
  auto& values = j["true_values"] = nlohmann::ordered_json::array();
  for (const auto& [d, v] : truth.true_values) values.push_back({d.subject, d.predicate, v});
  auto& provisions = j["true_provisions"] = nlohmann::ordered_json::array();
  for (const auto& [w, d, v] : truth.true_provisions) provisions.push_back({w.str(), d.subject, d.predicate, v});
  auto& a = j["true_A"] = nlohmann::ordered_json::object();
  for (const auto& [w, acc] : truth.true_A) a[w.str()] = acc;
  auto& p = j["true_P"] = nlohmann::ordered_json::object();
  for (const auto& [e, v] : truth.true_P) p[e.str()] = v;
  auto& r = j["true_R"] = nlohmann::ordered_json::object();
  for (const auto& [e, v] : truth.true_R) r[e.str()] = v;
  out << j.dump(1) << '\n';
}

GroundTruth read_truth(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    GroundTruth truth;
    truth.nominal_A = j.at("nominal").at("A").get<double>();
    truth.nominal_P = j.at("nominal").at("P").get<double>();
    truth.nominal_R = j.at("nominal").at("R").get<double>();
    for (const auto& row : j.at("true_values")) {
      truth.true_values[{row.at(0).get<std::string>(), row.at(1).get<std::string>()}] = row.at(2).get<std::string>();
    }
    for (const auto& row : j.at("true_provisions")) {
      truth.true_provisions.emplace(parse_source_key(row.at(0).get<std::string>()),
                                    DataItem{row.at(1).get<std::string>(), row.at(2).get<std::string>()},
                                    row.at(3).get<std::string>());
    }
    for (const auto& [k, v] : j.at("true_A").items()) truth.true_A[parse_source_key(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("true_P").items()) truth.true_P[parse_extractor_key(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("true_R").items()) truth.true_R[parse_extractor_key(k)] = v.get<double>();
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw FusionError(std::string("invalid ground-truth file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FusionError(std::string("invalid ground-truth file: ") + e.what());
  }
}

}  // namespace kbt::synth
