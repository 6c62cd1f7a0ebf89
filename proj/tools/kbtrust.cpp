#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kbtrust/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kbt;

namespace {

ObservationStore load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FusionError("cannot open " + path.string());
  IngestResult result = ingest_records(in);
  for (const IngestError& e : result.errors) {
    std::cerr << path.string() << ':' << e.line << ": " << e.message << '\n';
  }
  return std::move(result.store);
}

std::vector<gold::GoldLabel> load_gold(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FusionError("cannot open " + path.string());
  return gold::read_gold(in);
}

// Fills options not given on the command line (or via environment) from a
// key=value file whose keys are long flag names.
void apply_config(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FusionError("cannot open config " + path);
  for (const auto& [key, value] : pipeline::parse_config(in)) {
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw FusionError("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-based trust: fuse extracted triples and score web sources"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Estimate triple truth, source accuracy and extractor quality");
  std::string input, model = "multi", init = "default", gold_path;
  FusionConfig fc;
  std::optional<double> threshold;
  bool hard_map = false, freeze_alpha = false, popaccu = false;
  std::optional<int> n_override;
  fuse->add_option("--input", input, "Newline-delimited JSON extraction records")->required();
  fuse->add_option("--model", model, "single, multi or multi-sm")
      ->check(CLI::IsMember({"single", "multi", "multi-sm"}));
  fuse->add_option("--init", init, "default or gold")->check(CLI::IsMember({"default", "gold"}));
  fuse->add_option("--gold", gold_path, "Gold labels (gold.tsv) for --init gold");
  fuse->add_option("--iters", fc.t_max, "Maximum EM iterations")->check(CLI::PositiveNumber);
  fuse->add_option("--n", n_override, "False values per data item");
  fuse->add_option("--gamma", fc.gamma, "Prior share of true triples")->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--alpha0", fc.alpha0, "Initial correctness prior")->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--threshold", threshold, "Binarize confidences at this value")->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--min-size", fc.m_min, "Minimum triples per source (multi-sm)");
  fuse->add_option("--max-size", fc.M_max, "Maximum triples per source (multi-sm)");
  fuse->add_option("--seed", fc.rng_seed, "Split seed");
  fuse->add_option("--workers", fc.workers, "Worker threads")->envname("KBTRUST_WORKERS")->check(CLI::PositiveNumber);
  fuse->add_option("--tol", fc.convergence_tol, "Convergence tolerance on parameter change");
  fuse->add_flag("--hard-map", hard_map, "Use MAP correctness instead of soft weights");
  fuse->add_flag("--freeze-alpha", freeze_alpha, "Never re-estimate the correctness prior");
  fuse->add_flag("--popaccu", popaccu, "PopAccu instead of Accu for the single-layer model");
  fuse->add_option("--out-dir", out_dir, "Output directory");
  fuse->add_option("--config", config_path, "key=value defaults for any long option");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  synth::SynthConfig sc;
  synth->add_option("--sources", sc.n_sources, "Number of web sources");
  synth->add_option("--extractors", sc.n_extractors, "Number of extractors");
  synth->add_option("--triples", sc.triples_per_source, "Triples per source");
  synth->add_option("--accuracy", sc.A, "Source accuracy");
  synth->add_option("--delta", sc.delta, "Probability an extractor covers a source");
  synth->add_option("--recall", sc.R, "Extractor recall");
  synth->add_option("--component-precision", sc.P_component, "Per-field extraction accuracy");
  synth->add_option("--n", sc.domain_size, "False values per data item");
  synth->add_option("--seed", sc.seed, "Generator seed");
  synth->add_option("--out-dir", out_dir, "Output directory");
  synth->add_option("--config", config_path, "key=value defaults for any long option");

  // label
  auto* label = app.add_subcommand("label", "Label extracted triples against a reference KB");
  std::string kb_path, rules_path;
  label->add_option("--input", input, "Newline-delimited JSON extraction records")->required();
  label->add_option("--kb", kb_path, "Reference KB, tab-separated subject/predicate/object")->required();
  label->add_option("--rules", rules_path, "Type-check rules (JSON)");
  label->add_option("--out-dir", out_dir, "Output directory");
  label->add_option("--config", config_path, "key=value defaults for any long option");

  // eval
  auto* eval = app.add_subcommand("eval", "Score fuse outputs against ground truth or gold labels");
  std::string predictions, truth_path;
  eval->add_option("--predictions", predictions, "Directory written by fuse")->required();
  eval->add_option("--truth", truth_path, "Synthetic ground truth (truth.json)");
  eval->add_option("--gold", gold_path, "Gold labels (gold.tsv)");
  eval->add_option("--out-dir", out_dir, "Output directory");
  eval->add_option("--config", config_path, "key=value defaults for any long option");

  // granularity
  auto* gran = app.add_subcommand("granularity", "Split and merge sources and extractors");
  std::size_t min_size = fc.m_min, max_size = fc.M_max;
  std::uint64_t seed = 0;
  gran->add_option("--input", input, "Newline-delimited JSON extraction records")->required();
  gran->add_option("--min-size", min_size, "Minimum triples per node");
  gran->add_option("--max-size", max_size, "Maximum triples per node");
  gran->add_option("--seed", seed, "Split seed");
  gran->add_option("--out-dir", out_dir, "Output directory");
  gran->add_option("--config", config_path, "key=value defaults for any long option");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    if (!config_path.empty()) apply_config(*cmd, config_path);

    pipeline::FileSet files;
    if (cmd == fuse) {
      if (n_override) fc.n_single = fc.n_multi = *n_override;
      fc.confidence_threshold = threshold;
      fc.hard_map = hard_map;
      fc.freeze_alpha = freeze_alpha;
      fc.single_variant = popaccu ? SingleVariant::kPopAccu : SingleVariant::kAccu;
      pipeline::FuseOptions options{pipeline::parse_model(model), fc, nullptr};
      std::vector<gold::GoldLabel> labels;
      if (init == "gold") {
        if (gold_path.empty()) throw FusionError("--init gold requires --gold");
        labels = load_gold(gold_path);
        options.gold = &labels;
      }
      files = pipeline::fuse(load_records(input), options);
    } else if (cmd == synth) {
      files = pipeline::synth(sc);
    } else if (cmd == label) {
      std::ifstream kb_in(kb_path);
      if (!kb_in) throw FusionError("cannot open " + kb_path);
      const auto kb = gold::KbSnapshot::read_tsv(kb_in);
      std::optional<gold::RuleSet> rules;
      if (!rules_path.empty()) {
        std::ifstream rules_in(rules_path);
        if (!rules_in) throw FusionError("cannot open " + rules_path);
        rules = gold::RuleSet::read_json(rules_in);
      }
      auto out = pipeline::label(load_records(input), kb, rules ? &*rules : nullptr);
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
      files = std::move(out.files);
    } else if (cmd == eval) {
      if (truth_path.empty() == gold_path.empty()) throw FusionError("eval needs exactly one of --truth or --gold");
      const auto preds = pipeline::read_predictions(predictions);
      metrics::EvalReport report;
      if (!truth_path.empty()) {
        std::ifstream truth_in(truth_path);
        if (!truth_in) throw FusionError("cannot open " + truth_path);
        const auto truth = synth::read_truth(truth_in);
        report = pipeline::evaluate(preds, &truth, nullptr);
      } else {
        const auto labels = load_gold(gold_path);
        report = pipeline::evaluate(preds, nullptr, &labels);
      }
      files = pipeline::eval_files(report);
    } else if (cmd == gran) {
      files = pipeline::granularity(load_records(input), min_size, max_size, seed);
    }
    pipeline::commit(out_dir, files);
  } catch (const std::exception& e) {
    std::cerr << "kbtrust: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
