#include "kbtrust/granularity.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace kbt::granularity {

namespace {

int depth(const SourceKey& k) { return 1 + (k.predicate ? 1 : 0) + (k.webpage ? 1 : 0); }

int depth(const ExtractorKey& k) {
  return 1 + (k.pattern ? 1 : 0) + (k.predicate ? 1 : 0) + (k.website ? 1 : 0);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr char kSep = '\x1f';

}  // namespace

std::optional<SourceKey> get_parent(const SourceKey& key) {
  SourceKey parent = key;
  parent.shard.reset();
  if (key.shard) return parent;
  if (parent.webpage) {
    parent.webpage.reset();
  } else if (parent.predicate) {
    parent.predicate.reset();
  } else {
    return std::nullopt;
  }
  return parent;
}

std::optional<ExtractorKey> get_parent(const ExtractorKey& key) {
  ExtractorKey parent = key;
  parent.shard.reset();
  if (key.shard) return parent;
  if (parent.website) {
    parent.website.reset();
  } else if (parent.predicate) {
    parent.predicate.reset();
  } else if (parent.pattern) {
    parent.pattern.reset();
  } else {
    return std::nullopt;
  }
  return parent;
}

std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) {
  // FNV-1a, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h ^ splitmix64(seed));
}

std::vector<std::uint32_t> split(std::span<const std::string> hash_keys, std::size_t max_size, std::uint64_t seed) {
  const std::size_t count = hash_keys.size();
  std::vector<std::uint32_t> bucket(count, 0);
  if (count <= max_size || max_size == 0) return bucket;
  const std::size_t buckets = (count + max_size - 1) / max_size;

  std::vector<std::uint64_t> h(count);
  for (std::size_t i = 0; i < count; ++i) h[i] = stable_hash(hash_keys[i], seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (h[a] != h[b]) return h[a] < h[b];
    if (hash_keys[a] != hash_keys[b]) return hash_keys[a] < hash_keys[b];
    return a < b;
  });
  for (std::size_t b = 0; b < buckets; ++b) {
    for (std::size_t pos = count * b / buckets; pos < count * (b + 1) / buckets; ++pos) {
      bucket[order[pos]] = static_cast<std::uint32_t>(b);
    }
  }
  return bucket;
}

template <typename Key>
Partition<Key> split_and_merge(std::span<const Unit<Key>> units, std::size_t min_size, std::size_t max_size,
                               std::uint64_t seed) {
  struct Pending {
    std::vector<std::size_t> members;
    std::vector<Key> children;
  };
  // Pending nodes per hierarchy depth; children always sit one level deeper
  // than their parent, so processing deepest-first pools every child before
  // its parent is examined.
  std::map<int, std::map<Key, Pending>> levels;
  for (std::size_t i = 0; i < units.size(); ++i) {
    levels[depth(units[i].origin)][units[i].origin].members.push_back(i);
  }

  Partition<Key> out;
  out.assignment.resize(units.size());
  auto emit = [&](const Key& key, const Pending& node) {
    for (std::size_t i : node.members) out.assignment[i] = key;
    out.nodes.push_back({key, node.members.size(), node.children});
  };

  while (!levels.empty()) {
    auto deepest = std::prev(levels.end());
    const int level = deepest->first;
    std::map<Key, Pending> nodes = std::move(deepest->second);
    levels.erase(deepest);

    for (auto& [key, node] : nodes) {
      const std::size_t size = node.members.size();
      if (size > max_size) {
        std::vector<std::string> hash_keys;
        hash_keys.reserve(size);
        for (std::size_t i : node.members) hash_keys.push_back(units[i].hash_key);
        const auto bucket = split(hash_keys, max_size, seed);
        const std::size_t buckets = (size + max_size - 1) / max_size;
        std::vector<Pending> parts(buckets);
        for (std::size_t j = 0; j < size; ++j) parts[bucket[j]].members.push_back(node.members[j]);
        for (std::size_t b = 0; b < buckets; ++b) {
          Key sub = key;
          sub.shard = static_cast<std::uint32_t>(b);
          emit(sub, parts[b]);
        }
      } else if (size < min_size) {
        auto parent = get_parent(key);
        if (!parent) {
          emit(key, node);
        } else {
          Pending& target = levels[level - 1][*parent];
          target.members.insert(target.members.end(), node.members.begin(), node.members.end());
          target.children.push_back(key);
        }
      } else {
        emit(key, node);
      }
    }
  }
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const GranularityNode<Key>& a, const GranularityNode<Key>& b) { return a.key < b.key; });
  return out;
}

template Partition<SourceKey> split_and_merge(std::span<const Unit<SourceKey>>, std::size_t, std::size_t,
                                              std::uint64_t);
template Partition<ExtractorKey> split_and_merge(std::span<const Unit<ExtractorKey>>, std::size_t, std::size_t,
                                                 std::uint64_t);

Regranulated regranulate(const ObservationStore& store, std::size_t min_size, std::size_t max_size,
                         std::uint64_t seed, bool sources, bool extractors) {
  Regranulated out;
  const auto groups = store.groups();
  const auto records = store.records();

  auto triple_text = [&](ItemId d, ValueId v) {
    const DataItem& item = store.items()[d];
    return item.subject + kSep + item.predicate + kSep + store.values()[v];
  };

  out.source_units.reserve(groups.size());
  for (const Group& g : groups) out.source_units.push_back({store.sources()[g.w], triple_text(g.d, g.v)});
  out.extractor_units.reserve(records.size());
  for (const Record& r : records) {
    out.extractor_units.push_back({store.extractors()[r.e], store.sources()[r.w].str() + kSep + triple_text(r.d, r.v)});
  }

  if (sources) {
    out.sources = split_and_merge<SourceKey>(out.source_units, min_size, max_size, seed);
  } else {
    for (const auto& u : out.source_units) out.sources.assignment.push_back(u.origin);
  }
  if (extractors) {
    out.extractors = split_and_merge<ExtractorKey>(out.extractor_units, min_size, max_size, seed);
  } else {
    for (const auto& u : out.extractor_units) out.extractors.assignment.push_back(u.origin);
  }

  StoreBuilder builder;
  for (GroupId g = 0; g < groups.size(); ++g) {
    for (RecordId r = groups[g].first; r < groups[g].last; ++r) {
      const Record& rec = records[r];
      builder.add({out.extractors.assignment[r], out.sources.assignment[g], store.items()[rec.d],
                   store.values()[rec.v], rec.confidence});
    }
  }
  out.store = builder.build();
  return out;
}

}  // namespace kbt::granularity
