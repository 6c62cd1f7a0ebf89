#include "kbtrust/labels.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace kbt::gold {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& text) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return x;
}

}  // namespace

void KbSnapshot::add(Triple t) {
  index_sp_[{t.subject, t.predicate}].insert(t.object);
  triples_.insert(std::move(t));
}

const std::set<std::string>* KbSnapshot::objects(const std::string& subject, const std::string& predicate) const {
  auto it = index_sp_.find({subject, predicate});
  return it == index_sp_.end() ? nullptr : &it->second;
}

KbSnapshot KbSnapshot::read_tsv(std::istream& in) {
  KbSnapshot kb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) throw FusionError("kb line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    kb.add({fields[0], fields[1], fields[2]});
  }
  return kb;
}

RuleSet RuleSet::read_json(std::istream& in) {
  RuleSet out;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      TypeRule rule;
      rule.predicate = r.at("predicate").get<std::string>();
      for (const auto& c : r.at("checks")) {
        Check check;
        const std::string kind = c.at("kind").get<std::string>();
        if (kind == "reflexive_forbidden") {
          check.kind = Check::Kind::kReflexiveForbidden;
        } else if (kind == "type") {
          check.kind = Check::Kind::kType;
          const std::string field = c.value("field", "object");
          if (field != "subject" && field != "object") throw FusionError("type check field must be subject or object");
          check.on_object = field == "object";
          check.type_tag = c.at("type").get<std::string>();
        } else if (kind == "range") {
          check.kind = Check::Kind::kRange;
          check.lo = c.at("lo").get<double>();
          check.hi = c.at("hi").get<double>();
          check.units = c.value("units", "");
          if (!(check.lo < check.hi)) throw FusionError("range check needs lo < hi");
        } else {
          throw FusionError("unknown check kind '" + kind + "'");
        }
        rule.checks.push_back(std::move(check));
      }
      out.rules.push_back(std::move(rule));
    }
    const auto types = j.value("types", nlohmann::json::object());
    for (const auto& [entity, tags] : types.items()) {
      for (const auto& tag : tags) out.entity_types[entity].insert(tag.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FusionError(std::string("invalid rules file: ") + e.what());
  }
  return out;
}

std::vector<GoldLabel> label_lcwa(std::span<const Triple> triples, const KbSnapshot& kb) {
  std::vector<GoldLabel> out;
  out.reserve(triples.size());
  for (const Triple& t : triples) {
    GoldLabel label{{t.subject, t.predicate}, t.object, Label::kUnknown, Provenance::kLcwa};
    if (kb.contains(t)) {
      label.label = Label::kTrue;
      label.provenance = Provenance::kKb;
    } else if (kb.objects(t.subject, t.predicate) != nullptr) {
      label.label = Label::kFalse;
    }
    out.push_back(std::move(label));
  }
  return out;
}

TypecheckResult label_typecheck(std::span<const Triple> triples, const RuleSet& rules) {
  std::map<std::string, std::vector<const TypeRule*>> by_predicate;
  for (const TypeRule& r : rules.rules) by_predicate[r.predicate].push_back(&r);

  TypecheckResult out;
  for (const Triple& t : triples) {
    auto it = by_predicate.find(t.predicate);
    if (it == by_predicate.end()) continue;
    bool violated = false;
    for (const TypeRule* rule : it->second) {
      for (const Check& check : rule->checks) {
        switch (check.kind) {
          case Check::Kind::kReflexiveForbidden:
            violated = violated || t.subject == t.object;
            break;
          case Check::Kind::kType: {
            const std::string& entity = check.on_object ? t.object : t.subject;
            auto types = rules.entity_types.find(entity);
            if (types != rules.entity_types.end() && types->second.count(check.type_tag) == 0) violated = true;
            break;
          }
          case Check::Kind::kRange: {
            auto x = parse_number(t.object);
            if (!x) {
              out.warnings.push_back("range check on non-numeric object '" + t.object + "' for predicate '" +
                                     t.predicate + "' skipped");
            } else if (!(*x > check.lo && *x < check.hi)) {
              violated = true;
            }
            break;
          }
        }
      }
    }
    if (violated) out.labels.push_back({{t.subject, t.predicate}, t.object, Label::kFalse, Provenance::kTypecheck});
  }
  return out;
}

std::vector<GoldLabel> combine(std::span<const GoldLabel> lcwa, std::span<const GoldLabel> typecheck) {
  std::map<std::pair<DataItem, Value>, GoldLabel> merged;
  for (const GoldLabel& g : lcwa) merged.insert_or_assign({g.d, g.v}, g);
  for (const GoldLabel& g : typecheck) merged.insert_or_assign({g.d, g.v}, g);
  std::vector<GoldLabel> out;
  out.reserve(merged.size());
  for (auto& [key, label] : merged) out.push_back(std::move(label));
  return out;
}

std::vector<Triple> store_triples(const ObservationStore& store) {
  std::vector<Triple> out;
  for (ItemId d = 0; d < store.items().size(); ++d) {
    const DataItem& item = store.items()[d];
    ValueId prev = 0;
    bool first = true;
    for (GroupId g : store.item_groups(d)) {
      const ValueId v = store.groups()[g].v;
      if (!first && v == prev) continue;
      out.push_back({item.subject, item.predicate, store.values()[v]});
      prev = v;
      first = false;
    }
  }
  return out;
}

std::string to_string(Label label) {
  switch (label) {
    case Label::kTrue: return "true";
    case Label::kFalse: return "false";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::kKb: return "kb";
    case Provenance::kLcwa: return "lcwa";
    case Provenance::kTypecheck: return "typecheck";
    case Provenance::kManual: return "manual";
  }
  return "manual";
}

void write_gold(std::ostream& out, std::span<const GoldLabel> labels) {
  out << "subject\tpredicate\tobject\tlabel\tprovenance\n";
  for (const GoldLabel& g : labels) {
    out << g.d.subject << '\t' << g.d.predicate << '\t' << g.v << '\t' << to_string(g.label) << '\t'
        << to_string(g.provenance) << '\n';
  }
}

std::vector<GoldLabel> read_gold(std::istream& in) {
  std::vector<GoldLabel> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || (line_no == 1 && line.starts_with("subject\t"))) continue;
    auto f = split_tabs(line);
    if (f.size() != 5) throw FusionError("gold line " + std::to_string(line_no) + ": expected 5 fields");
    GoldLabel g{{f[0], f[1]}, f[2], Label::kUnknown, Provenance::kManual};
    if (f[3] == "true") {
      g.label = Label::kTrue;
    } else if (f[3] == "false") {
      g.label = Label::kFalse;
    } else if (f[3] != "unknown") {
      throw FusionError("gold line " + std::to_string(line_no) + ": bad label '" + f[3] + "'");
    }
    if (f[4] == "kb") {
      g.provenance = Provenance::kKb;
    } else if (f[4] == "lcwa") {
      g.provenance = Provenance::kLcwa;
    } else if (f[4] == "typecheck") {
      g.provenance = Provenance::kTypecheck;
    } else if (f[4] != "manual") {
      throw FusionError("gold line " + std::to_string(line_no) + ": bad provenance '" + f[4] + "'");
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::map<std::pair<DataItem, Value>, bool> known_labels(std::span<const GoldLabel> labels) {
  std::map<std::pair<DataItem, Value>, bool> out;
  for (const GoldLabel& g : labels) {
    if (g.label == Label::kUnknown) continue;
    out[{g.d, g.v}] = g.label == Label::kTrue;
  }
  return out;
}

namespace {

// Known label of every group's (d, v), or -1.
std::vector<int> group_labels(const ObservationStore& store, std::span<const GoldLabel> labels) {
  const auto known = known_labels(labels);
  std::vector<int> out(store.groups().size(), -1);
  for (GroupId g = 0; g < out.size(); ++g) {
    const Group& group = store.groups()[g];
    auto it = known.find({store.items()[group.d], store.values()[group.v]});
    if (it != known.end()) out[g] = it->second ? 1 : 0;
  }
  return out;
}

struct Tally {
  std::size_t labeled = 0;
  std::size_t true_count = 0;

  void add(int label) {
    if (label < 0) return;
    ++labeled;
    true_count += static_cast<std::size_t>(label);
  }
  double fraction() const { return static_cast<double>(true_count) / static_cast<double>(labeled); }
};

}  // namespace

QualityParams gold_quality(const ObservationStore& store, std::span<const GoldLabel> labels) {
  const auto by_group = group_labels(store, labels);
  std::vector<Tally> sources(store.sources().size());
  std::vector<Tally> extractors(store.extractors().size());
  for (GroupId g = 0; g < by_group.size(); ++g) {
    sources[store.groups()[g].w].add(by_group[g]);
    for (const Record& r : store.group_records(g)) {
      if (r.confidence > 0.0) extractors[r.e].add(by_group[g]);
    }
  }
  QualityParams out;
  for (SourceId w = 0; w < sources.size(); ++w) {
    if (sources[w].labeled > 0) out.A[store.sources()[w]] = sources[w].fraction();
  }
  for (ExtractorId e = 0; e < extractors.size(); ++e) {
    if (extractors[e].labeled > 0) out.P[store.extractors()[e]] = extractors[e].fraction();
  }
  return out;
}

std::map<single::PairSourceKey, double> gold_pair_accuracy(const ObservationStore& store,
                                                           std::span<const GoldLabel> labels) {
  const auto by_group = group_labels(store, labels);
  std::map<std::pair<SourceId, ExtractorId>, Tally> pairs;
  for (GroupId g = 0; g < by_group.size(); ++g) {
    for (const Record& r : store.group_records(g)) pairs[{r.w, r.e}].add(by_group[g]);
  }
  std::map<single::PairSourceKey, double> out;
  for (const auto& [pair, tally] : pairs) {
    if (tally.labeled == 0) continue;
    out[{store.sources()[pair.first], store.extractors()[pair.second]}] = tally.fraction();
  }
  return out;
}

}  // namespace kbt::gold
