#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kbtrust/labels.hpp"
#include "kbtrust/metrics.hpp"
#include "kbtrust/store.hpp"
#include "kbtrust/synthgen.hpp"
#include "kbtrust/types.hpp"

namespace kbt::pipeline {

/// Output file name -> full contents. Commands build their outputs in memory
/// and commit them together.
using FileSet = std::map<std::string, std::string>;

enum class Model { kSingle, kMulti, kMultiSm };

/// "single", "multi" or "multi-sm". Throws FusionError otherwise.
Model parse_model(const std::string& text);

struct FuseOptions {
  Model model = Model::kMulti;
  FusionConfig config;
  /// Gold labels for the "+" initialization; nullptr for defaults.
  const std::vector<gold::GoldLabel>* gold = nullptr;
};

/// source_kbt.tsv, triple_truth.tsv, iterations.tsv, and per model
/// extraction_correctness.tsv + extractor_quality.tsv (multi),
/// pair_source_accuracy.tsv (single), reattribution maps (multi-sm).
FileSet fuse(const ObservationStore& store, const FuseOptions& options);

/// records.jsonl and truth.json.
FileSet synth(const synth::SynthConfig& config);

struct LabelOutput {
  FileSet files;  // gold.tsv
  std::vector<std::string> warnings;
};

LabelOutput label(const ObservationStore& store, const gold::KbSnapshot& kb, const gold::RuleSet* rules);

/// source_reattribution.tsv, extractor_reattribution.tsv, granularity_nodes.tsv.
FileSet granularity(const ObservationStore& store, std::size_t min_size, std::size_t max_size, std::uint64_t seed);

/// Parsed fuse outputs.
struct Predictions {
  std::map<std::tuple<std::string, std::string, std::string>, std::optional<double>> triples;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, double> correctness;
  std::map<std::string, double> accuracy;
};

/// Reads triple_truth.tsv (required), extraction_correctness.tsv and
/// source_kbt.tsv (optional) from a fuse output directory.
Predictions read_predictions(const std::filesystem::path& dir);

/// Evaluates against synthetic ground truth (all metrics) or gold labels
/// (value metrics and coverage only).
metrics::EvalReport evaluate(const Predictions& predictions, const synth::GroundTruth* truth,
                             const std::vector<gold::GoldLabel>* gold);

/// report.txt, calibration.csv, pr_curve.csv.
FileSet eval_files(const metrics::EvalReport& report);

/// Writes every file under `dir` via temporaries renamed at the end. On any
/// failure, files already written by this call are removed and the error is
/// rethrown.
void commit(const std::filesystem::path& dir, const FileSet& files);

/// key=value lines; '#' starts a comment. Throws FusionError on lines
/// without '='.
std::vector<std::pair<std::string, std::string>> parse_config(std::istream& in);

std::string read_file(const std::filesystem::path& path);

}  // namespace kbt::pipeline
