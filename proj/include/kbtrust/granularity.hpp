#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

namespace kbt::granularity {

/// Drops the most specific set feature; nullopt at the top of the hierarchy.
std::optional<SourceKey> get_parent(const SourceKey& key);
std::optional<ExtractorKey> get_parent(const ExtractorKey& key);

/// One triple attributed to a finest-granularity node. `hash_key` identifies
/// the triple for seeded splitting.
template <typename Key>
struct Unit {
  Key origin;
  std::string hash_key;
};

template <typename Key>
struct GranularityNode {
  Key key;
  std::size_t size = 0;
  std::vector<Key> children;  // nodes pooled into this one by merging
};

template <typename Key>
struct Partition {
  std::vector<GranularityNode<Key>> nodes;  // final nodes, ascending by key
  std::vector<Key> assignment;              // final key of every input unit
};

/// Seeded 64-bit hash, stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed);

/// Distributes `count` triples into ceil(count / max_size) buckets: triples
/// are ordered by seeded hash of their key and dealt into contiguous runs
/// whose sizes differ by at most one. Returns the bucket of each triple.
std::vector<std::uint32_t> split(std::span<const std::string> hash_keys, std::size_t max_size, std::uint64_t seed);

/// SplitAndMerge: oversized nodes are split, undersized nodes are pooled into
/// their parent until they fit or reach the top of the hierarchy.
template <typename Key>
Partition<Key> split_and_merge(std::span<const Unit<Key>> units, std::size_t min_size, std::size_t max_size,
                               std::uint64_t seed);

/// Result of re-keying a store's sources and/or extractors.
struct Regranulated {
  ObservationStore store;
  Partition<SourceKey> sources;      // units: one per original (w, d, v)
  Partition<ExtractorKey> extractors;  // units: one per original record
  std::vector<Unit<SourceKey>> source_units;
  std::vector<Unit<ExtractorKey>> extractor_units;
};

/// Applies split_and_merge to sources and extractors, reattributes every
/// record and rebuilds the store (pooling records before recomputing scopes).
Regranulated regranulate(const ObservationStore& store, std::size_t min_size, std::size_t max_size,
                         std::uint64_t seed, bool sources = true, bool extractors = true);

}  // namespace kbt::granularity
