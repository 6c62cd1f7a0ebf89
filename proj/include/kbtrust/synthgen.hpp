#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace kbt::synth {

struct SynthConfig {
  int n_sources = 10;
  int n_extractors = 5;
  int triples_per_source = 100;
  double A = 0.7;             // source accuracy
  double delta = 0.5;         // probability an extractor covers a source
  double R = 0.5;             // probability a covered provided triple is extracted
  double P_component = 0.8;   // per-field extraction accuracy
  int domain_size = 10;       // false values per data item
  std::uint64_t seed = 0;

  void validate() const;
};

using Provision = std::tuple<SourceKey, DataItem, Value>;

struct GroundTruth {
  std::map<DataItem, Value> true_values;
  std::set<Provision> true_provisions;
  std::map<SourceKey, double> true_A;  // realized
  std::map<ExtractorKey, double> true_P;  // realized
  std::map<ExtractorKey, double> true_R;  // realized share of covered provisions extracted, corrupted or not
  double nominal_A = 0.0;
  double nominal_P = 0.0;
  double nominal_R = 0.0;
};

struct Dataset {
  std::vector<ExtractionRecord> records;
  GroundTruth truth;
};

/// Seeded generator: shared data items, sources that state the true value
/// with probability A, extractors with per-source coverage delta, recall R and
/// independent per-field corruption (a misread subject or predicate comes from
/// a pool of names no source uses, a misread object is another false value of
/// the item).
Dataset generate(const SynthConfig& config);

/// Sidecar serialization of GroundTruth (JSON).
void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);

}  // namespace kbt::synth
