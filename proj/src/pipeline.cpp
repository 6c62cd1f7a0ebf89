#include "kbtrust/pipeline.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "kbtrust/granularity.hpp"
#include "kbtrust/multi_layer.hpp"
#include "kbtrust/single_layer.hpp"

namespace kbt::pipeline {

using metrics::fixed6;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

// Data rows of a TSV with a header line.
std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw FusionError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != columns) {
      throw FusionError(path.filename().string() + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(columns) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_prob(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return x;
  } catch (const std::exception&) {
    throw FusionError(where + ": bad number '" + text + "'");
  }
}

void write_iterations(std::ostringstream& out, const std::vector<IterationLog>& log) {
  out << "iteration\tmax_delta\tmean_accuracy\tmean_precision\tmean_recall\n";
  for (const IterationLog& it : log) {
    out << it.iteration << '\t' << fixed6(it.max_delta) << '\t' << fixed6(it.mean_accuracy) << '\t'
        << fixed6(it.mean_precision) << '\t' << fixed6(it.mean_recall) << '\n';
  }
}

void write_triples(std::ostringstream& out, const ObservationStore& store, const std::vector<ItemPosterior>& items,
                   const std::vector<bool>& covered) {
  out << "subject\tpredicate\tobject\tprobability\n";
  for (ItemId d = 0; d < items.size(); ++d) {
    const DataItem& item = store.items()[d];
    const ItemPosterior& post = items[d];
    for (std::size_t i = 0; i < post.values.size(); ++i) {
      out << item.subject << '\t' << item.predicate << '\t' << store.values()[post.values[i]] << '\t'
          << (covered[d] ? fixed6(post.probs[i]) : "NA") << '\n';
    }
  }
}

FileSet fuse_single(const ObservationStore& store, const FuseOptions& options) {
  std::optional<std::map<single::PairSourceKey, double>> initial;
  if (options.gold) initial = gold::gold_pair_accuracy(store, *options.gold);
  const single::Result result = single::single_layer_em(store, options.config, initial ? &*initial : nullptr);

  FileSet files;
  std::ostringstream sources, triples, pairs, iterations;
  sources << "source\taccuracy\ttriples\n";
  for (SourceId w = 0; w < result.source_accuracy.size(); ++w) {
    if (!result.source_supported[w]) continue;
    sources << store.sources()[w].str() << '\t' << fixed6(result.source_accuracy[w]) << '\t'
            << result.source_triples[w] << '\n';
  }
  write_triples(triples, store, result.items, result.item_covered);
  pairs << "source\textractor\taccuracy\n";
  for (std::size_t s = 0; s < result.pair_sources.size(); ++s) {
    if (!result.supported[s]) continue;
    const single::PairSource& ps = result.pair_sources[s];
    pairs << store.sources()[ps.w].str() << '\t' << store.extractors()[ps.e].str() << '\t'
          << fixed6(result.accuracy[s]) << '\n';
  }
  write_iterations(iterations, result.log);
  files["source_kbt.tsv"] = sources.str();
  files["triple_truth.tsv"] = triples.str();
  files["pair_source_accuracy.tsv"] = pairs.str();
  files["iterations.tsv"] = iterations.str();
  return files;
}

FileSet fuse_multi(const ObservationStore& store, const FuseOptions& options) {
  std::optional<QualityParams> initial;
  if (options.gold) initial = gold::gold_quality(store, *options.gold);
  const multi::Result result = multi::multilayer_em(store, options.config, initial ? &*initial : nullptr);

  FileSet files;
  std::ostringstream sources, triples, correctness, extractors, iterations;
  sources << "source\taccuracy\ttriples\n";
  for (SourceId w = 0; w < store.sources().size(); ++w) {
    if (!result.source_supported[w]) continue;
    sources << store.sources()[w].str() << '\t' << fixed6(result.quality.A[w]) << '\t'
            << store.source_groups(w).size() << '\n';
  }
  write_triples(triples, store, result.items, result.item_covered);
  correctness << "source\tsubject\tpredicate\tobject\tprobability\n";
  for (GroupId g = 0; g < store.groups().size(); ++g) {
    const Group& group = store.groups()[g];
    const DataItem& item = store.items()[group.d];
    correctness << store.sources()[group.w].str() << '\t' << item.subject << '\t' << item.predicate << '\t'
                << store.values()[group.v] << '\t' << fixed6(result.correctness[g]) << '\n';
  }
  extractors << "extractor\tprecision\trecall\tq\n";
  for (ExtractorId e = 0; e < store.extractors().size(); ++e) {
    if (!result.extractor_supported[e]) continue;
    extractors << store.extractors()[e].str() << '\t' << fixed6(result.quality.P[e]) << '\t'
               << fixed6(result.quality.R[e]) << '\t' << fixed6(result.quality.Q[e]) << '\n';
  }
  write_iterations(iterations, result.log);
  files["source_kbt.tsv"] = sources.str();
  files["triple_truth.tsv"] = triples.str();
  files["extraction_correctness.tsv"] = correctness.str();
  files["extractor_quality.tsv"] = extractors.str();
  files["iterations.tsv"] = iterations.str();
  return files;
}

template <typename Key>
std::string reattribution_tsv(const std::vector<granularity::Unit<Key>>& units,
                              const granularity::Partition<Key>& partition) {
  std::map<std::pair<Key, Key>, std::size_t> counts;
  for (std::size_t i = 0; i < units.size(); ++i) ++counts[{units[i].origin, partition.assignment[i]}];
  std::ostringstream out;
  out << "original\tfinal\ttriples\n";
  for (const auto& [pair, count] : counts) out << pair.first.str() << '\t' << pair.second.str() << '\t' << count << '\n';
  return out.str();
}

template <typename Key>
void write_nodes(std::ostringstream& out, const char* kind, const granularity::Partition<Key>& partition) {
  for (const auto& node : partition.nodes) {
    out << kind << '\t' << node.key.str() << '\t' << node.size << '\t' << node.children.size() << '\n';
  }
}

FileSet granularity_files(const granularity::Regranulated& re) {
  FileSet files;
  files["source_reattribution.tsv"] = reattribution_tsv(re.source_units, re.sources);
  files["extractor_reattribution.tsv"] = reattribution_tsv(re.extractor_units, re.extractors);
  std::ostringstream nodes;
  nodes << "kind\tkey\tsize\tmerged_children\n";
  write_nodes(nodes, "source", re.sources);
  write_nodes(nodes, "extractor", re.extractors);
  files["granularity_nodes.tsv"] = nodes.str();
  return files;
}

}  // namespace

Model parse_model(const std::string& text) {
  if (text == "single") return Model::kSingle;
  if (text == "multi") return Model::kMulti;
  if (text == "multi-sm") return Model::kMultiSm;
  throw FusionError("unknown model '" + text + "' (expected single, multi or multi-sm)");
}

FileSet fuse(const ObservationStore& store, const FuseOptions& options) {
  options.config.validate();
  switch (options.model) {
    case Model::kSingle:
      return fuse_single(store, options);
    case Model::kMulti:
      return fuse_multi(store, options);
    case Model::kMultiSm: {
      const auto re = granularity::regranulate(store, options.config.m_min, options.config.M_max,
                                               options.config.rng_seed);
      FileSet files = fuse_multi(re.store, options);
      files.merge(granularity_files(re));
      return files;
    }
  }
  return {};
}

FileSet synth(const synth::SynthConfig& config) {
  const synth::Dataset data = synth::generate(config);
  std::ostringstream records, truth;
  for (const ExtractionRecord& r : data.records) records << record_to_json(r) << '\n';
  synth::write_truth(truth, data.truth);
  return {{"records.jsonl", records.str()}, {"truth.json", truth.str()}};
}

LabelOutput label(const ObservationStore& store, const gold::KbSnapshot& kb, const gold::RuleSet* rules) {
  const auto triples = gold::store_triples(store);
  const auto lcwa = gold::label_lcwa(triples, kb);
  LabelOutput out;
  gold::TypecheckResult checked;
  if (rules) checked = gold::label_typecheck(triples, *rules);
  out.warnings = std::move(checked.warnings);
  std::ostringstream text;
  gold::write_gold(text, gold::combine(lcwa, checked.labels));
  out.files["gold.tsv"] = text.str();
  return out;
}

FileSet granularity(const ObservationStore& store, std::size_t min_size, std::size_t max_size, std::uint64_t seed) {
  if (!(min_size < max_size)) throw FusionError("min size must be below max size");
  return granularity_files(granularity::regranulate(store, min_size, max_size, seed));
}

Predictions read_predictions(const std::filesystem::path& dir) {
  Predictions out;
  for (const auto& row : read_tsv(dir / "triple_truth.tsv", 4)) {
    std::optional<double> p;
    if (row[3] != "NA") p = parse_prob(row[3], "triple_truth.tsv");
    out.triples[{row[0], row[1], row[2]}] = p;
  }
  if (std::filesystem::exists(dir / "extraction_correctness.tsv")) {
    for (const auto& row : read_tsv(dir / "extraction_correctness.tsv", 5)) {
      out.correctness[{row[0], row[1], row[2], row[3]}] = parse_prob(row[4], "extraction_correctness.tsv");
    }
  }
  if (std::filesystem::exists(dir / "source_kbt.tsv")) {
    for (const auto& row : read_tsv(dir / "source_kbt.tsv", 3)) {
      out.accuracy[row[0]] = parse_prob(row[1], "source_kbt.tsv");
    }
  }
  return out;
}

metrics::EvalReport evaluate(const Predictions& predictions, const synth::GroundTruth* truth,
                             const std::vector<gold::GoldLabel>* gold) {
  using TripleKey = std::tuple<std::string, std::string, std::string>;
  std::map<TripleKey, double> predicted;
  std::size_t evaluated = 0;
  for (const auto& [key, p] : predictions.triples) {
    if (!p) continue;
    predicted[key] = *p;
    ++evaluated;
  }

  std::map<TripleKey, bool> labels;
  if (truth) {
    for (const auto& [key, p] : predictions.triples) {
      auto it = truth->true_values.find({std::get<0>(key), std::get<1>(key)});
      if (it != truth->true_values.end()) labels[key] = it->second == std::get<2>(key);
    }
  }
  if (gold) {
    for (const auto& [item, label] : gold::known_labels(*gold)) {
      labels[{item.first.subject, item.first.predicate, item.second}] = label;
    }
  }

  metrics::EvalReport report;
  std::map<TripleKey, double> indicator;
  for (const auto& [key, label] : labels) indicator[key] = label ? 1.0 : 0.0;
  report.sqv = metrics::square_loss(predicted, indicator);

  const auto scored = metrics::join_labels(predicted, labels);
  if (auto cal = metrics::calibration(scored)) {
    report.wdev = cal->wdev;
    report.calibration_buckets = std::move(cal->buckets);
  }
  if (auto pr = metrics::pr_curve(scored)) {
    report.auc_pr = pr->auc;
    report.pr_points = std::move(pr->points);
  }
  report.cov = metrics::coverage(evaluated, predictions.triples.size());

  if (truth) {
    using ProvisionKey = std::tuple<std::string, std::string, std::string, std::string>;
    std::set<ProvisionKey> provided;
    for (const auto& [w, d, v] : truth->true_provisions) provided.emplace(w.str(), d.subject, d.predicate, v);
    std::map<ProvisionKey, double> c_truth;
    for (const auto& [key, p] : predictions.correctness) c_truth[key] = provided.count(key) ? 1.0 : 0.0;
    report.sqc = metrics::square_loss(predictions.correctness, c_truth);

    std::map<std::string, double> a_truth;
    for (const auto& [w, a] : truth->true_A) a_truth[w.str()] = a;
    report.sqa = metrics::square_loss(predictions.accuracy, a_truth);
  }
  return report;
}

FileSet eval_files(const metrics::EvalReport& report) {
  std::ostringstream text, calibration, pr;
  metrics::write_report(text, report);
  metrics::write_calibration_csv(calibration, report);
  metrics::write_pr_csv(pr, report);
  return {{"report.txt", text.str()}, {"calibration.csv", calibration.str()}, {"pr_curve.csv", pr.str()}};
}

void commit(const std::filesystem::path& dir, const FileSet& files) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> temps;
  std::vector<fs::path> committed;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : temps) fs::remove(p, ec);
    for (const auto& p : committed) fs::remove(p, ec);
  };
  try {
    for (const auto& [name, contents] : files) {
      const fs::path tmp = dir / ("." + name + ".tmp");
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << contents;
      out.close();
      if (!out) throw FusionError("cannot write " + tmp.string());
    }
    std::size_t i = 0;
    for (const auto& [name, contents] : files) {
      fs::rename(temps[i], dir / name);
      committed.push_back(dir / name);
      ++i;
    }
  } catch (...) {
    cleanup();
    throw;
  }
}

std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FusionError("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw FusionError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FusionError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace kbt::pipeline
