#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kbtrust/store.hpp"
#include "kbtrust/types.hpp"

using namespace kbt;

namespace {

const char* kDuplicateInput =
    R"({"extractor":"E1","website":"a.com","spredicate":"born","webpage":"a.com/1","subject":"s","predicate":"born","object":"1961","confidence":0.4}
{"extractor":"E1","website":"a.com","spredicate":"born","webpage":"a.com/1","subject":"s","predicate":"born","object":"1961","confidence":0.9}
{"extractor":"E2","website":"a.com","spredicate":"born","webpage":"a.com/1","subject":"s","predicate":"born","object":"1962","confidence":0.5}
)";

IngestResult ingest(const std::string& text) {
  std::istringstream in(text);
  return ingest_records(in);
}

}  // namespace

TEST_CASE("duplicate keys merge by max confidence") {
  const auto result = ingest(kDuplicateInput);
  CHECK(result.errors.empty());
  const auto records = result.store.to_records();
  REQUIRE(records.size() == 2);
  for (const auto& r : records) {
    if (r.e.extractor == "E1") CHECK(r.confidence == 0.9);
  }
}

TEST_CASE("missing confidence defaults to one") {
  const auto record = parse_record_line(R"({"extractor":"E","website":"w.com","subject":"s","predicate":"p","object":"o"})");
  CHECK(record.confidence == 1.0);
  CHECK(record.w.website == "w.com");
  CHECK_FALSE(record.w.webpage.has_value());
}

TEST_CASE("out-of-range confidence is rejected and ingest continues") {
  const auto result = ingest(
      R"({"extractor":"E","website":"w.com","subject":"s","predicate":"p","object":"o","confidence":1.3}
{"extractor":"E","website":"w.com","subject":"s","predicate":"p","object":"o2"}
not json

{"extractor":"","website":"w.com","subject":"s","predicate":"p","object":"o3"}
)");
  REQUIRE(result.errors.size() == 3);
  CHECK(result.errors[0].line == 1);
  CHECK(result.errors[0].message.find("confidence") != std::string::npos);
  CHECK(result.errors[1].line == 3);
  CHECK(result.errors[2].line == 5);
  CHECK(result.store.records().size() == 1);
}

TEST_CASE("empty input gives an empty store") {
  const auto result = ingest("");
  CHECK(result.errors.empty());
  CHECK(result.store.empty());
  CHECK(result.store.items().empty());
}

TEST_CASE("ingest is idempotent") {
  const auto a = ingest(kDuplicateInput).store.to_records();
  const auto b = ingest(std::string(kDuplicateInput) + kDuplicateInput).store.to_records();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(record_to_json(a[i]) == record_to_json(b[i]));
}

TEST_CASE("numbers and dates are canonicalized") {
  CHECK(canonical_number(3.50) == "3.5");
  CHECK(canonical_number(1500) == "1500");
  CHECK(canonical_date_or_text("1961-08-04T00:00:00Z") == "1961-08-04");
  CHECK(canonical_date_or_text("Honolulu") == "Honolulu");
  const auto r = parse_record_line(R"({"extractor":"E","website":"w.com","subject":"s","predicate":"p","object":2.0})");
  CHECK(r.v == "2");
}

TEST_CASE("record json round-trips") {
  const auto r = parse_record_line(
      R"({"extractor":"E","pattern":"pt","epredicate":"p","ewebsite":"w.com","website":"w.com","spredicate":"p","webpage":"w.com/x","subject":"s","predicate":"p","object":"o","confidence":0.25})");
  const auto again = parse_record_line(record_to_json(r));
  CHECK(again.e == r.e);
  CHECK(again.w == r.w);
  CHECK(again.d == r.d);
  CHECK(again.v == r.v);
  CHECK(again.confidence == r.confidence);
}

TEST_CASE("keys round-trip through their text form") {
  const SourceKey sources[] = {{"a.com", std::nullopt, std::nullopt, std::nullopt},
                               {"a.com", "born", std::nullopt, std::nullopt},
                               {"a.com", "born", "a.com/1", std::nullopt},
                               {"a.com", "born", "a.com/1", 3u}};
  for (const auto& k : sources) CHECK(parse_source_key(k.str()) == k);
  const ExtractorKey extractors[] = {{"E", std::nullopt, std::nullopt, std::nullopt, std::nullopt},
                                     {"E", "pt", "born", "a.com", std::nullopt},
                                     {"E", "pt", std::nullopt, std::nullopt, 1u}};
  for (const auto& k : extractors) CHECK(parse_extractor_key(k.str()) == k);
  CHECK_THROWS_AS(parse_source_key(""), std::invalid_argument);
}

TEST_CASE("malformed keys are rejected by the builder") {
  StoreBuilder builder;
  CHECK_THROWS_AS(builder.add({{"E"}, {"w.com", std::nullopt, "page", std::nullopt}, {"s", "p"}, "o", 1.0}), FusionError);
  CHECK_THROWS_AS(builder.add({{"E"}, {"w.com"}, {"", "p"}, "o", 1.0}), FusionError);
  CHECK_THROWS_AS(builder.add({{"E"}, {"w.com"}, {"s", "p"}, "", 1.0}), FusionError);
  CHECK_THROWS_AS(builder.add({{"E"}, {"w.com"}, {"s", "p"}, "o", -0.1}), FusionError);
  CHECK(builder.size() == 0);
}

TEST_CASE("indexes are consistent with the records") {
  std::vector<ExtractionRecord> records;
  for (int w = 0; w < 3; ++w) {
    for (int e = 0; e < 3; ++e) {
      for (int d = 0; d < 4; ++d) {
        if ((w + e + d) % 3 == 0) continue;
        records.push_back({{"E" + std::to_string(e)},
                           {"site" + std::to_string(w % 2) + ".com", "p", "pg" + std::to_string(w), std::nullopt},
                           {"s" + std::to_string(d), "p"},
                           "v" + std::to_string((d + e) % 2),
                           1.0});
      }
    }
  }
  const auto store = build_store(records);
  std::size_t from_groups = 0;
  for (GroupId g = 0; g < store.groups().size(); ++g) {
    const Group& group = store.groups()[g];
    for (const Record& r : store.group_records(g)) {
      CHECK(r.w == group.w);
      CHECK(r.d == group.d);
      CHECK(r.v == group.v);
      ++from_groups;
    }
    CHECK(store.find_group(group.w, group.d, group.v) == g);
    const auto scoped = store.scope_extractors(group.scope);
    for (const Record& r : store.group_records(g)) {
      CHECK(std::find(scoped.begin(), scoped.end(), r.e) != scoped.end());
    }
  }
  CHECK(from_groups == store.records().size());

  std::size_t from_items = 0, from_sources = 0, from_extractors = 0;
  for (ItemId d = 0; d < store.items().size(); ++d) {
    for (GroupId g : store.item_groups(d)) {
      CHECK(store.groups()[g].d == d);
      from_items += store.group_records(g).size();
    }
  }
  for (SourceId w = 0; w < store.sources().size(); ++w) {
    for (GroupId g : store.source_groups(w)) from_sources += store.group_records(g).size();
  }
  for (ExtractorId e = 0; e < store.extractors().size(); ++e) {
    for (RecordId r : store.extractor_records(e)) {
      CHECK(store.records()[r].e == e);
      ++from_extractors;
    }
  }
  CHECK(from_items == store.records().size());
  CHECK(from_sources == store.records().size());
  CHECK(from_extractors == store.records().size());
}

TEST_CASE("clamp") {
  CHECK(clamp(0.0, 1e-6) == 1e-6);
  CHECK(clamp(1.0, 1e-6) == 1.0 - 1e-6);
  CHECK(clamp(0.8, 1e-6) == 0.8);
}

TEST_CASE("sigmoid is stable at extreme arguments") {
  CHECK(sigmoid(1e4) == 1.0);
  CHECK(sigmoid(-1e4) >= 0.0);
  CHECK(std::isfinite(sigmoid(-1e4)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(logit(0.5) == 0.0);
}

TEST_CASE("config validation") {
  FusionConfig config;
  CHECK_NOTHROW(config.validate());
  config.m_min = config.M_max;
  CHECK_THROWS_AS(config.validate(), FusionError);
  config = {};
  config.t_max = 0;
  CHECK_THROWS_AS(config.validate(), FusionError);
  config = {};
  config.clamp_eps = 0.5;
  CHECK_THROWS_AS(config.validate(), FusionError);
  config = {};
  CHECK(config.default_P() == doctest::Approx(4.0 / 7.0));
}
