#include "kbtrust/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <tuple>

#include <json.hpp>

namespace kbt {

namespace {

template <typename T>
std::vector<T> sorted_unique(std::vector<T> keys) {
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

template <typename T>
std::uint32_t id_of(const std::vector<T>& table, const T& key) {
  auto it = std::lower_bound(table.begin(), table.end(), key);
  return static_cast<std::uint32_t>(it - table.begin());
}

template <typename T>
std::optional<std::uint32_t> find_in(const std::vector<T>& table, const T& key) {
  auto it = std::lower_bound(table.begin(), table.end(), key);
  if (it == table.end() || !(*it == key)) return std::nullopt;
  return static_cast<std::uint32_t>(it - table.begin());
}

// Builds a CSR index: for each bucket in [0, buckets), the members that map to
// it, in the order `members` enumerates them.
template <typename Member, typename BucketOf>
void build_csr(std::size_t buckets, const std::vector<Member>& members, BucketOf bucket_of,
               std::vector<Member>& out, std::vector<std::uint32_t>& offsets) {
  offsets.assign(buckets + 1, 0);
  for (const Member& m : members) ++offsets[bucket_of(m) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  out.assign(members.size(), Member{});
  std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const Member& m : members) out[cursor[bucket_of(m)]++] = m;
}

void check_record(const ExtractionRecord& r) {
  if (!r.e.well_formed()) throw FusionError("extractor key empty or out of specificity order");
  if (!r.w.well_formed()) throw FusionError("source key empty or out of specificity order");
  if (r.d.subject.empty() || r.d.predicate.empty()) throw FusionError("subject and predicate must be non-empty");
  if (r.v.empty()) throw FusionError("object must be non-empty");
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
    throw FusionError("confidence " + std::to_string(r.confidence) + " outside [0, 1]");
  }
}

}  // namespace

std::optional<SourceId> ObservationStore::find_source(const SourceKey& key) const { return find_in(sources_, key); }
std::optional<ExtractorId> ObservationStore::find_extractor(const ExtractorKey& key) const {
  return find_in(extractors_, key);
}
std::optional<ItemId> ObservationStore::find_item(const DataItem& key) const { return find_in(items_, key); }
std::optional<ValueId> ObservationStore::find_value(const Value& key) const { return find_in(values_, key); }

std::optional<GroupId> ObservationStore::find_group(SourceId w, ItemId d, ValueId v) const {
  auto it = std::lower_bound(groups_.begin(), groups_.end(), std::make_tuple(w, d, v),
                             [](const Group& g, const std::tuple<SourceId, ItemId, ValueId>& key) {
                               return std::make_tuple(g.w, g.d, g.v) < key;
                             });
  if (it == groups_.end() || it->w != w || it->d != d || it->v != v) return std::nullopt;
  return static_cast<GroupId>(it - groups_.begin());
}

std::vector<ExtractionRecord> ObservationStore::to_records() const {
  std::vector<ExtractionRecord> out;
  out.reserve(records_.size());
  for (const Record& r : records_) {
    out.push_back({extractors_[r.e], sources_[r.w], items_[r.d], values_[r.v], r.confidence});
  }
  return out;
}

void StoreBuilder::add(ExtractionRecord record) {
  check_record(record);
  // Zero confidence carries no evidence: same as an absent record.
  if (record.confidence == 0.0) return;
  pending_.push_back(std::move(record));
}

ObservationStore StoreBuilder::build() const {
  ObservationStore s;
  {
    std::vector<SourceKey> sources;
    std::vector<ExtractorKey> extractors;
    std::vector<DataItem> items;
    std::vector<Value> values;
    sources.reserve(pending_.size());
    extractors.reserve(pending_.size());
    items.reserve(pending_.size());
    values.reserve(pending_.size());
    for (const auto& r : pending_) {
      sources.push_back(r.w);
      extractors.push_back(r.e);
      items.push_back(r.d);
      values.push_back(r.v);
    }
    s.sources_ = sorted_unique(std::move(sources));
    s.extractors_ = sorted_unique(std::move(extractors));
    s.items_ = sorted_unique(std::move(items));
    s.values_ = sorted_unique(std::move(values));
  }

  std::vector<Record> raw;
  raw.reserve(pending_.size());
  for (const auto& r : pending_) {
    raw.push_back({id_of(s.extractors_, r.e), id_of(s.sources_, r.w), id_of(s.items_, r.d), id_of(s.values_, r.v),
                   r.confidence});
  }
  auto order_key = [](const Record& r) { return std::make_tuple(r.w, r.d, r.v, r.e); };
  std::sort(raw.begin(), raw.end(), [&](const Record& a, const Record& b) {
    auto ka = order_key(a);
    auto kb = order_key(b);
    if (ka != kb) return ka < kb;
    return a.confidence > b.confidence;
  });
  // Duplicates merge by max confidence: the first of each run after sorting.
  for (const Record& r : raw) {
    if (!s.records_.empty() && order_key(s.records_.back()) == order_key(r)) continue;
    s.records_.push_back(r);
  }

  // Scopes: (website of w, predicate of d).
  std::vector<ScopeKey> scope_keys;
  for (const Record& r : s.records_) {
    scope_keys.push_back({s.sources_[r.w].website, s.items_[r.d].predicate});
  }
  s.scopes_ = sorted_unique(std::move(scope_keys));

  for (RecordId i = 0; i < s.records_.size(); ++i) {
    const Record& r = s.records_[i];
    if (s.groups_.empty() || s.groups_.back().w != r.w || s.groups_.back().d != r.d || s.groups_.back().v != r.v) {
      ScopeId scope = id_of(s.scopes_, ScopeKey{s.sources_[r.w].website, s.items_[r.d].predicate});
      s.groups_.push_back({r.w, r.d, r.v, i, i + 1, scope});
    } else {
      s.groups_.back().last = i + 1;
    }
  }

  std::vector<GroupId> group_ids(s.groups_.size());
  std::iota(group_ids.begin(), group_ids.end(), 0u);

  // item -> groups ordered by (v, w)
  {
    std::vector<GroupId> by_value = group_ids;
    std::stable_sort(by_value.begin(), by_value.end(), [&](GroupId a, GroupId b) {
      const Group& ga = s.groups_[a];
      const Group& gb = s.groups_[b];
      return std::tie(ga.d, ga.v, ga.w) < std::tie(gb.d, gb.v, gb.w);
    });
    build_csr(s.items_.size(), by_value, [&](GroupId g) { return s.groups_[g].d; }, s.item_groups_,
              s.item_offsets_);
  }
  build_csr(s.sources_.size(), group_ids, [&](GroupId g) { return s.groups_[g].w; }, s.source_groups_,
            s.source_offsets_);
  build_csr(s.scopes_.size(), group_ids, [&](GroupId g) { return s.groups_[g].scope; }, s.scope_groups_,
            s.scope_group_offsets_);

  {
    std::vector<RecordId> record_ids(s.records_.size());
    std::iota(record_ids.begin(), record_ids.end(), 0u);
    build_csr(s.extractors_.size(), record_ids, [&](RecordId r) { return s.records_[r].e; }, s.extractor_records_,
              s.extractor_offsets_);
  }

  // (scope, extractor) co-occurrences.
  std::vector<std::pair<ScopeId, ExtractorId>> pairs;
  for (const Group& g : s.groups_) {
    for (RecordId r = g.first; r < g.last; ++r) pairs.emplace_back(g.scope, s.records_[r].e);
  }
  pairs = sorted_unique(std::move(pairs));
  {
    std::vector<std::uint32_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<std::uint32_t> members;
    build_csr(s.scopes_.size(), idx, [&](std::uint32_t i) { return pairs[i].first; }, members, s.scope_offsets_);
    s.scope_extractors_.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) s.scope_extractors_[i] = pairs[members[i]].second;

    std::vector<std::uint32_t> by_extractor = idx;
    std::stable_sort(by_extractor.begin(), by_extractor.end(), [&](std::uint32_t a, std::uint32_t b) {
      return std::tie(pairs[a].second, pairs[a].first) < std::tie(pairs[b].second, pairs[b].first);
    });
    build_csr(s.extractors_.size(), by_extractor, [&](std::uint32_t i) { return pairs[i].second; }, members,
              s.extractor_scope_offsets_);
    s.extractor_scopes_.resize(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) s.extractor_scopes_[i] = pairs[members[i]].first;
  }
  return s;
}

ObservationStore build_store(std::vector<ExtractionRecord> records) {
  StoreBuilder builder;
  for (auto& r : records) builder.add(std::move(r));
  return builder.build();
}

std::string canonical_number(double x) {
  if (!std::isfinite(x)) throw FusionError("non-finite numeric object");
  if (x == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string canonical_date_or_text(std::string_view text) {
  // YYYY-MM-DDT00:00:00[.0*][Z] -> YYYY-MM-DD
  auto is_digits = [&](std::size_t from, std::size_t n) {
    if (text.size() < from + n) return false;
    for (std::size_t i = from; i < from + n; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
    }
    return true;
  };
  if (text.size() > 10 && is_digits(0, 4) && text[4] == '-' && is_digits(5, 2) && text[7] == '-' &&
      is_digits(8, 2) && text[10] == 'T') {
    std::string_view rest = text.substr(11);
    if (rest.starts_with("00:00:00")) {
      rest.remove_prefix(8);
      if (rest.starts_with('.')) {
        rest.remove_prefix(1);
        while (rest.starts_with('0')) rest.remove_prefix(1);
      }
      if (rest.empty() || rest == "Z") return std::string(text.substr(0, 10));
    }
  }
  return std::string(text);
}

ExtractionRecord parse_record_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FusionError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FusionError("record must be a JSON object");

  auto required = [&](const char* field) -> std::string {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) throw FusionError(std::string("missing string field '") + field + "'");
    std::string text = it->get<std::string>();
    if (text.empty()) throw FusionError(std::string("empty field '") + field + "'");
    return text;
  };
  auto optional = [&](const char* field) -> std::optional<std::string> {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FusionError(std::string("field '") + field + "' must be a string");
    return it->get<std::string>();
  };

  ExtractionRecord r;
  r.e.extractor = required("extractor");
  r.e.pattern = optional("pattern");
  r.e.predicate = optional("epredicate");
  r.e.website = optional("ewebsite");
  r.w.website = required("website");
  r.w.predicate = optional("spredicate");
  r.w.webpage = optional("webpage");
  r.d.subject = required("subject");
  r.d.predicate = required("predicate");

  auto obj = j.find("object");
  if (obj == j.end()) throw FusionError("missing field 'object'");
  if (obj->is_string()) {
    r.v = canonical_date_or_text(obj->get<std::string>());
  } else if (obj->is_number()) {
    r.v = canonical_number(obj->get<double>());
  } else {
    throw FusionError("field 'object' must be a string or number");
  }

  auto conf = j.find("confidence");
  if (conf != j.end() && !conf->is_null()) {
    if (!conf->is_number()) throw FusionError("field 'confidence' must be a number");
    r.confidence = conf->get<double>();
  }
  check_record(r);
  return r;
}

std::string record_to_json(const ExtractionRecord& r) {
  nlohmann::ordered_json j;
  j["extractor"] = r.e.extractor;
  if (r.e.pattern) j["pattern"] = *r.e.pattern;
  if (r.e.predicate) j["epredicate"] = *r.e.predicate;
  if (r.e.website) j["ewebsite"] = *r.e.website;
  j["website"] = r.w.website;
  if (r.w.predicate) j["spredicate"] = *r.w.predicate;
  if (r.w.webpage) j["webpage"] = *r.w.webpage;
  j["subject"] = r.d.subject;
  j["predicate"] = r.d.predicate;
  j["object"] = r.v;
  j["confidence"] = r.confidence;
  return j.dump();
}

IngestResult ingest_records(std::istream& in) {
  IngestResult result;
  StoreBuilder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      builder.add(parse_record_line(line));
    } catch (const FusionError& e) {
      result.errors.push_back({line_no, e.what()});
    }
  }
  result.store = builder.build();
  return result;
}

}  // namespace kbt
