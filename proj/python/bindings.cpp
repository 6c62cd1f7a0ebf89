#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "kbtrust/granularity.hpp"
#include "kbtrust/metrics.hpp"
#include "kbtrust/multi_layer.hpp"
#include "kbtrust/pipeline.hpp"
#include "kbtrust/single_layer.hpp"
#include "kbtrust/synthgen.hpp"

namespace py = pybind11;
using namespace kbt;

namespace {

using Scored = std::vector<std::pair<double, bool>>;

py::object maybe(const std::optional<double>& x) {
  if (!x) return py::none();
  return py::float_(*x);
}

py::dict report_dict(const metrics::EvalReport& r) {
  py::dict d;
  d["sqv"] = maybe(r.sqv);
  d["sqc"] = maybe(r.sqc);
  d["sqa"] = maybe(r.sqa);
  d["wdev"] = maybe(r.wdev);
  d["auc_pr"] = maybe(r.auc_pr);
  d["cov"] = maybe(r.cov);
  return d;
}

FusionConfig make_config(const py::dict& kw) {
  FusionConfig c;
  for (const auto& [k, v] : kw) {
    const auto key = py::cast<std::string>(k);
    if (key == "n") c.n_single = c.n_multi = py::cast<int>(v);
    else if (key == "n_single") c.n_single = py::cast<int>(v);
    else if (key == "n_multi") c.n_multi = py::cast<int>(v);
    else if (key == "gamma") c.gamma = py::cast<double>(v);
    else if (key == "alpha0") c.alpha0 = py::cast<double>(v);
    else if (key == "default_A") c.default_A = py::cast<double>(v);
    else if (key == "default_R") c.default_R = py::cast<double>(v);
    else if (key == "default_Q") c.default_Q = py::cast<double>(v);
    else if (key == "t_max" || key == "iters") c.t_max = py::cast<int>(v);
    else if (key == "prior_update_start_iter") c.prior_update_start_iter = py::cast<int>(v);
    else if (key == "clamp_eps") c.clamp_eps = py::cast<double>(v);
    else if (key == "threshold") c.confidence_threshold = py::cast<std::optional<double>>(v);
    else if (key == "min_size") c.m_min = py::cast<std::size_t>(v);
    else if (key == "max_size") c.M_max = py::cast<std::size_t>(v);
    else if (key == "tol") c.convergence_tol = py::cast<double>(v);
    else if (key == "seed") c.rng_seed = py::cast<std::uint64_t>(v);
    else if (key == "hard_map") c.hard_map = py::cast<bool>(v);
    else if (key == "freeze_alpha") c.freeze_alpha = py::cast<bool>(v);
    else if (key == "popaccu") c.single_variant = py::cast<bool>(v) ? SingleVariant::kPopAccu : SingleVariant::kAccu;
    else if (key == "workers") c.workers = py::cast<int>(v);
    else throw py::key_error("unknown option '" + key + "'");
  }
  c.validate();
  return c;
}

ObservationStore store_from_text(const std::string& text, std::vector<IngestError>* errors) {
  std::istringstream in(text);
  IngestResult r = ingest_records(in);
  if (errors != nullptr) *errors = std::move(r.errors);
  return std::move(r.store);
}

std::vector<multi::Evidence> evidence(const std::vector<std::tuple<double, double, double>>& rows, double eps) {
  std::vector<multi::Evidence> out;
  for (const auto& [recall, q, conf] : rows) out.push_back({multi::compute_vote(recall, q, eps), conf});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Knowledge-based trust: multi-layer truth discovery over extracted triples.";

  py::register_exception<FusionError>(m, "FusionError", PyExc_ValueError);

  py::class_<ObservationStore>(m, "Store")
      .def_property_readonly("n_records", [](const ObservationStore& s) { return s.records().size(); })
      .def_property_readonly("n_sources", [](const ObservationStore& s) { return s.sources().size(); })
      .def_property_readonly("n_extractors", [](const ObservationStore& s) { return s.extractors().size(); })
      .def_property_readonly("n_items", [](const ObservationStore& s) { return s.items().size(); })
      .def_property_readonly("n_triples", [](const ObservationStore& s) { return s.groups().size(); })
      .def("records", [](const ObservationStore& s) {
        std::vector<std::string> out;
        for (const auto& r : s.to_records()) out.push_back(record_to_json(r));
        return out;
      });

  m.def(
      "ingest",
      [](const std::string& text) {
        std::vector<IngestError> errors;
        ObservationStore store = store_from_text(text, &errors);
        std::vector<std::pair<std::size_t, std::string>> errs;
        for (auto& e : errors) errs.emplace_back(e.line, e.message);
        return py::make_tuple(std::move(store), errs);
      },
      py::arg("text"), "Parse newline-delimited JSON records. Returns (store, [(line, message)]).");

  m.def(
      "fuse",
      [](const ObservationStore& store, const std::string& model, const py::kwargs& kw) {
        pipeline::FuseOptions opts;
        opts.model = pipeline::parse_model(model);
        opts.config = make_config(kw);
        py::gil_scoped_release release;
        return pipeline::fuse(store, opts);
      },
      py::arg("store"), py::arg("model") = "multi",
      "Run fusion; returns {file name: tab-separated contents}. Keyword options mirror the CLI flags.");

  m.def(
      "single_layer",
      [](const ObservationStore& store, const py::kwargs& kw) {
        const auto res = single::single_layer_em(store, make_config(kw));
        std::map<std::string, double> acc;
        for (std::size_t i = 0; i < res.pair_sources.size(); ++i) {
          const auto& ps = res.pair_sources[i];
          acc[store.sources()[ps.w].str() + "|" + store.extractors()[ps.e].str()] = res.accuracy[i];
        }
        return acc;
      },
      py::arg("store"), "Accuracy per (source|extractor) pair after single-layer EM.");

  m.def(
      "multi_layer",
      [](const ObservationStore& store, const py::kwargs& kw) {
        const auto res = multi::multilayer_em(store, make_config(kw));
        const QualityParams q = res.keyed_quality(store);
        py::dict d;
        std::map<std::string, double> a, p, r, qq;
        for (const auto& [k, v] : q.A) a[k.str()] = v;
        for (const auto& [k, v] : q.P) p[k.str()] = v;
        for (const auto& [k, v] : q.R) r[k.str()] = v;
        for (const auto& [k, v] : q.Q) qq[k.str()] = v;
        d["A"] = a;
        d["P"] = p;
        d["R"] = r;
        d["Q"] = qq;
        d["iterations"] = res.log.size();
        return d;
      },
      py::arg("store"), "Estimated source accuracy and extractor P/R/Q after multi-layer EM.");

  m.def(
      "synth",
      [](int sources, int extractors, int triples, double accuracy, double delta, double recall,
         double component_precision, int n, std::uint64_t seed) {
        synth::SynthConfig c;
        c.n_sources = sources;
        c.n_extractors = extractors;
        c.triples_per_source = triples;
        c.A = accuracy;
        c.delta = delta;
        c.R = recall;
        c.P_component = component_precision;
        c.domain_size = n;
        c.seed = seed;
        return pipeline::synth(c);
      },
      py::arg("sources") = 10, py::arg("extractors") = 5, py::arg("triples") = 100, py::arg("accuracy") = 0.7,
      py::arg("delta") = 0.5, py::arg("recall") = 0.5, py::arg("component_precision") = 0.8, py::arg("n") = 10,
      py::arg("seed") = 0, "Synthetic corpus; returns {\"records.jsonl\": ..., \"truth.json\": ...}.");

  m.def(
      "evaluate",
      [](const std::string& predictions_dir, const std::string& truth_json) {
        std::istringstream in(truth_json);
        const auto truth = synth::read_truth(in);
        const auto preds = pipeline::read_predictions(predictions_dir);
        return report_dict(pipeline::evaluate(preds, &truth, nullptr));
      },
      py::arg("predictions_dir"), py::arg("truth_json"), "Score a fuse output directory against synthetic truth.");

  m.def("commit", [](const std::string& dir, const pipeline::FileSet& files) { pipeline::commit(dir, files); },
        py::arg("dir"), py::arg("files"));

  m.def("derive_q", &multi::derive_q, py::arg("precision"), py::arg("recall"), py::arg("gamma") = 0.25,
        py::arg("eps") = 1e-6);
  m.def(
      "compute_vote",
      [](double recall, double q, double eps) {
        const auto v = multi::compute_vote(recall, q, eps);
        return std::make_pair(v.pre, v.abs);
      },
      py::arg("recall"), py::arg("q"), py::arg("eps") = 1e-6, "(presence vote, absence vote)");
  m.def(
      "vote_count",
      [](const std::vector<std::tuple<double, double, double>>& rows, double eps) {
        const auto ev = evidence(rows, eps);
        return multi::vote_count(ev);
      },
      py::arg("scoped"), py::arg("eps") = 1e-6, "Rows are (recall, q, confidence); confidence 0 means not extracted.");
  m.def(
      "extraction_posterior",
      [](const std::vector<std::tuple<double, double, double>>& rows, double alpha, double eps) {
        const auto ev = evidence(rows, eps);
        return multi::extraction_posterior(ev, alpha, eps);
      },
      py::arg("scoped"), py::arg("alpha") = 0.5, py::arg("eps") = 1e-6);
  m.def(
      "value_posterior",
      [](const std::vector<std::tuple<std::size_t, double, double>>& rows, std::size_t k, int n, double eps) {
        std::vector<multi::Provision> prov;
        for (const auto& [cand, c, a] : rows) prov.push_back({cand, c, a});
        const auto post = multi::value_posterior(prov, k, n, eps);
        return py::make_tuple(post.probs, post.residual_each);
      },
      py::arg("provisions"), py::arg("k"), py::arg("n"), py::arg("eps") = 1e-6,
      "Rows are (candidate index, correctness, accuracy). Returns (candidate probs, residual per unobserved value).");
  m.def("update_alpha", &multi::update_alpha, py::arg("value_prob"), py::arg("accuracy"), py::arg("eps") = 1e-6);

  m.def(
      "split_and_merge",
      [](const std::vector<std::string>& pages, std::size_t min_size, std::size_t max_size, std::uint64_t seed) {
        std::vector<granularity::Unit<SourceKey>> units;
        for (std::size_t i = 0; i < pages.size(); ++i) units.push_back({parse_source_key(pages[i]), pages[i] + "#" + std::to_string(i)});
        const auto part = granularity::split_and_merge<SourceKey>(units, min_size, max_size, seed);
        std::vector<std::pair<std::string, std::size_t>> nodes;
        for (const auto& n : part.nodes) nodes.emplace_back(n.key.str(), n.size);
        return nodes;
      },
      py::arg("sources"), py::arg("min_size") = 5, py::arg("max_size") = 10000, py::arg("seed") = 0,
      "One entry per triple, keyed by source (\"site\", \"site|pred\" or \"site|pred|page\"). Returns final nodes.");

  m.def("square_loss", [](const std::map<std::string, double>& pred, const std::map<std::string, double>& truth) {
    return maybe(metrics::square_loss(pred, truth));
  });
  m.def("wdev", [](const Scored& s) {
    const auto c = metrics::calibration(s);
    return c ? py::object(py::float_(c->wdev)) : py::none();
  });
  m.def("auc_pr", [](const Scored& s) {
    const auto c = metrics::pr_curve(s);
    return c ? py::object(py::float_(c->auc)) : py::none();
  });
  m.def("coverage", [](std::size_t evaluated, std::size_t total) { return maybe(metrics::coverage(evaluated, total)); });
}
