#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kbtrust/types.hpp"

namespace kbt {

using SourceId = std::uint32_t;
using ExtractorId = std::uint32_t;
using ItemId = std::uint32_t;
using ValueId = std::uint32_t;
using GroupId = std::uint32_t;
using RecordId = std::uint32_t;
using ScopeId = std::uint32_t;

/// Interned extraction record. Ids index the store's sorted key tables, so
/// ordering by id is ordering by key.
struct Record {
  ExtractorId e;
  SourceId w;
  ItemId d;
  ValueId v;
  double confidence;
};

/// All records sharing one (w, d, v): the extractions of one candidate
/// provided triple from one source.
struct Group {
  SourceId w;
  ItemId d;
  ValueId v;
  RecordId first;
  RecordId last;  // one past the end
  ScopeId scope;
};

/// (website, predicate) pair an extractor has been observed on.
struct ScopeKey {
  std::string website;
  std::string predicate;

  auto operator<=>(const ScopeKey&) const = default;
};

/// Immutable, deduplicated, indexed set of extraction records.
///
/// Records are sorted by (w, d, v, e); groups by (w, d, v). Every index below
/// lists its members in ascending id order, which is the canonical reduction
/// order used by all inference stages.
class ObservationStore {
 public:
  ObservationStore() = default;

  std::span<const SourceKey> sources() const { return sources_; }
  std::span<const ExtractorKey> extractors() const { return extractors_; }
  std::span<const DataItem> items() const { return items_; }
  std::span<const Value> values() const { return values_; }
  std::span<const Record> records() const { return records_; }
  std::span<const Group> groups() const { return groups_; }
  std::span<const ScopeKey> scopes() const { return scopes_; }

  bool empty() const { return records_.empty(); }

  std::span<const Record> group_records(GroupId g) const {
    const Group& group = groups_[g];
    return std::span<const Record>(records_).subspan(group.first, group.last - group.first);
  }
  /// Groups about item d, ordered by (v, w).
  std::span<const GroupId> item_groups(ItemId d) const { return slice(item_groups_, item_offsets_, d); }
  /// Groups provided by source w, ordered by (d, v).
  std::span<const GroupId> source_groups(SourceId w) const { return slice(source_groups_, source_offsets_, w); }
  std::span<const RecordId> extractor_records(ExtractorId e) const {
    return slice(extractor_records_, extractor_offsets_, e);
  }
  /// Extractors observed anywhere on the scope's (website, predicate).
  std::span<const ExtractorId> scope_extractors(ScopeId s) const {
    return slice(scope_extractors_, scope_offsets_, s);
  }
  std::span<const ScopeId> extractor_scopes(ExtractorId e) const {
    return slice(extractor_scopes_, extractor_scope_offsets_, e);
  }
  std::span<const GroupId> scope_groups(ScopeId s) const { return slice(scope_groups_, scope_group_offsets_, s); }

  std::optional<SourceId> find_source(const SourceKey& key) const;
  std::optional<ExtractorId> find_extractor(const ExtractorKey& key) const;
  std::optional<ItemId> find_item(const DataItem& key) const;
  std::optional<ValueId> find_value(const Value& key) const;
  std::optional<GroupId> find_group(SourceId w, ItemId d, ValueId v) const;

  /// Round-trips the store back to keyed records, in canonical order.
  std::vector<ExtractionRecord> to_records() const;

 private:
  friend class StoreBuilder;

  template <typename T>
  static std::span<const T> slice(const std::vector<T>& data, const std::vector<std::uint32_t>& offsets,
                                  std::uint32_t i) {
    return std::span<const T>(data).subspan(offsets[i], offsets[i + 1] - offsets[i]);
  }

  std::vector<SourceKey> sources_;
  std::vector<ExtractorKey> extractors_;
  std::vector<DataItem> items_;
  std::vector<Value> values_;
  std::vector<Record> records_;
  std::vector<Group> groups_;
  std::vector<ScopeKey> scopes_;

  std::vector<GroupId> item_groups_;
  std::vector<std::uint32_t> item_offsets_;
  std::vector<GroupId> source_groups_;
  std::vector<std::uint32_t> source_offsets_;
  std::vector<RecordId> extractor_records_;
  std::vector<std::uint32_t> extractor_offsets_;
  std::vector<ExtractorId> scope_extractors_;
  std::vector<std::uint32_t> scope_offsets_;
  std::vector<ScopeId> extractor_scopes_;
  std::vector<std::uint32_t> extractor_scope_offsets_;
  std::vector<GroupId> scope_groups_;
  std::vector<std::uint32_t> scope_group_offsets_;
};

/// Single-writer accumulator for ObservationStore.
class StoreBuilder {
 public:
  /// Throws FusionError on invariant violations (empty key fields, bad
  /// specificity order, confidence outside [0, 1]).
  void add(ExtractionRecord record);
  std::size_t size() const { return pending_.size(); }
  ObservationStore build() const;

 private:
  std::vector<ExtractionRecord> pending_;
};

ObservationStore build_store(std::vector<ExtractionRecord> records);

struct IngestError {
  std::size_t line;
  std::string message;
};

struct IngestResult {
  ObservationStore store;
  std::vector<IngestError> errors;
};

/// Parses one JSON record line. Throws FusionError describing the problem.
ExtractionRecord parse_record_line(std::string_view line);

/// Serializes a record in the newline-delimited input format (no newline).
std::string record_to_json(const ExtractionRecord& record);

/// Reads newline-delimited JSON records. Malformed lines are reported and
/// skipped; blank lines are ignored.
IngestResult ingest_records(std::istream& in);

/// Canonical value text: numbers without trailing zeros, midnight
/// timestamps reduced to ISO-8601 dates, other strings verbatim.
std::string canonical_number(double x);
std::string canonical_date_or_text(std::string_view text);

}  // namespace kbt
