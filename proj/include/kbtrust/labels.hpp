#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kbtrust/single_layer.hpp"
#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace kbt::gold {

/// Gold-standard labeling of extracted triples against a reference KB
/// (local-closed-world assumption) and declarative per-predicate type rules.

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

enum class Label { kTrue, kFalse, kUnknown };
enum class Provenance { kKb, kLcwa, kTypecheck, kManual };

struct GoldLabel {
  DataItem d;
  Value v;
  Label label;
  Provenance provenance;
};

class KbSnapshot {
 public:
  void add(Triple t);
  bool contains(const Triple& t) const { return triples_.count(t) > 0; }
  /// Objects the KB holds for (s, p); nullptr when (s, p) is absent.
  const std::set<std::string>* objects(const std::string& subject, const std::string& predicate) const;
  std::size_t size() const { return triples_.size(); }

  /// Tab-separated subject, predicate, object per line.
  static KbSnapshot read_tsv(std::istream& in);

 private:
  std::set<Triple> triples_;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> index_sp_;
};

struct Check {
  enum class Kind { kReflexiveForbidden, kType, kRange };
  Kind kind = Kind::kReflexiveForbidden;
  bool on_object = true;  // kType: which side is constrained
  std::string type_tag;   // kType
  double lo = 0.0;        // kRange, exclusive bounds
  double hi = 0.0;
  std::string units;
};

struct TypeRule {
  std::string predicate;
  std::vector<Check> checks;
};

struct RuleSet {
  std::vector<TypeRule> rules;
  std::map<std::string, std::set<std::string>> entity_types;

  /// {"rules": [{"predicate": p, "checks": [{"kind": "reflexive_forbidden"} |
  ///   {"kind": "type", "field": "subject"|"object", "type": tag} |
  ///   {"kind": "range", "lo": x, "hi": y, "units": u}]}],
  ///  "types": {entity: [tag, ...]}}
  static RuleSet read_json(std::istream& in);
};

/// true when in the KB, false when the KB knows (s, p) with other objects,
/// unknown otherwise.
std::vector<GoldLabel> label_lcwa(std::span<const Triple> triples, const KbSnapshot& kb);

struct TypecheckResult {
  std::vector<GoldLabel> labels;  // false labels only
  std::vector<std::string> warnings;
};

/// Labels a triple false when any rule check for its predicate fails.
/// Entities with no recorded types never fail a type check; non-numeric
/// objects skip range checks with a warning.
TypecheckResult label_typecheck(std::span<const Triple> triples, const RuleSet& rules);

/// One label per distinct triple: type-check failures override LCWA labels.
std::vector<GoldLabel> combine(std::span<const GoldLabel> lcwa, std::span<const GoldLabel> typecheck);

/// Distinct (subject, predicate, object) of a store, in canonical order.
std::vector<Triple> store_triples(const ObservationStore& store);

void write_gold(std::ostream& out, std::span<const GoldLabel> labels);
std::vector<GoldLabel> read_gold(std::istream& in);

std::string to_string(Label label);
std::string to_string(Provenance provenance);

/// Known (true/false) labels keyed by triple; unknown labels are dropped.
std::map<std::pair<DataItem, Value>, bool> known_labels(std::span<const GoldLabel> labels);

/// Initial quality from gold labels: A_w (P_e) is the fraction of a source's
/// (extractor's) labeled extracted triples that are true. Entities without
/// labeled triples are absent and fall back to the defaults.
QualityParams gold_quality(const ObservationStore& store, std::span<const GoldLabel> labels);
std::map<single::PairSourceKey, double> gold_pair_accuracy(const ObservationStore& store,
                                                           std::span<const GoldLabel> labels);

}  // namespace kbt::gold
