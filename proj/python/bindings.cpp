#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <panelbn/analysis.hpp>
#include <panelbn/averaging.hpp>
#include <panelbn/cli.hpp>
#include <panelbn/data_model.hpp>
#include <panelbn/error.hpp>
#include <panelbn/imputation.hpp>
#include <panelbn/serialization.hpp>
#include <panelbn/simulation.hpp>
#include <panelbn/structure.hpp>

namespace py = pybind11;
using namespace py::literals;
using namespace panelbn;

namespace {

std::vector<std::pair<std::string, std::string>> named_arcs(const std::vector<std::string>& names,
                                                            const std::vector<Arc>& arcs) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& a : arcs) out.emplace_back(names[a.from], names[a.to]);
    return out;
}

py::dict to_dict(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_dict(const py::object& o) {
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_panelbn, m) {
    m.doc() = "Dynamic Bayesian networks for regional weekly panel data";
    m.attr("__version__") = "0.3.0";

    py::register_exception<InstabilityError>(m, "InstabilityError", PyExc_RuntimeError);
    py::register_exception<BootstrapError>(m, "BootstrapError", PyExc_RuntimeError);

    py::class_<PanelDataset>(m, "PanelDataset")
        .def_property_readonly("conditions", &PanelDataset::conditions)
        .def_property_readonly("n_regions", &PanelDataset::n_regions)
        .def_property_readonly("n_weeks", &PanelDataset::n_weeks)
        .def_property_readonly("regions",
                               [](const PanelDataset& p) {
                                   std::vector<std::pair<std::string, std::string>> out;
                                   for (const auto& r : p.regions()) out.emplace_back(r.state, r.county);
                                   return out;
                               })
        .def("series",
             [](const PanelDataset& p, const std::string& condition, std::size_t region) {
                 auto s = p.series(p.condition_index(condition), region);
                 return std::vector<double>(s.begin(), s.end());
             },
             "condition"_a, "region"_a)
        .def("missing_fraction",
             [](const PanelDataset& p, const std::string& c) { return p.missing_fraction(p.condition_index(c)); })
        .def("complete", &PanelDataset::complete)
        .def("to_csv", [](const PanelDataset& p) {
            std::ostringstream out;
            write_panel_csv(out, p);
            return out.str();
        });

    m.def("load_panel", py::overload_cast<const std::string&>(&load_panel_file), "path"_a);
    m.def("read_panel_csv",
          [](const std::string& text) {
              std::istringstream in(text);
              return load_panel(in);
          },
          "text"_a);
    m.def("impute_ewma", [](const std::vector<double>& s, std::size_t k) { return impute_ewma(s, k); }, "series"_a,
          "k"_a = default_ewma_window);
    m.def("impute_panel",
          [](const PanelDataset& p, std::size_t k, std::size_t threads) {
              auto r = impute_panel(p, k, threads);
              return py::make_tuple(r.panel, r.n_imputed, r.dropped.size());
          },
          "panel"_a, "k"_a = default_ewma_window, "threads"_a = 1,
          "Returns (imputed panel, cells imputed, series dropped).");
    m.def("drop_sparse_conditions", &drop_sparse_conditions, "panel"_a, "max_missing_fraction"_a);
    m.def("drop_incomplete_regions", &drop_incomplete_regions, "panel"_a);

    py::class_<TransitionTable>(m, "TransitionTable")
        .def_readonly("conditions", &TransitionTable::conditions)
        .def_readonly("x0", &TransitionTable::x0)
        .def_readonly("x1", &TransitionTable::x1)
        .def_property_readonly("rows", &TransitionTable::rows);
    m.def("make_transition_table", &make_transition_table, "panel"_a);

    py::class_<TwoSliceGraph>(m, "TwoSliceGraph")
        .def(py::init<std::vector<std::string>>(), "conditions"_a)
        .def_property_readonly("conditions", &TwoSliceGraph::conditions)
        .def("add_arc",
             [](TwoSliceGraph& g, const std::string& a, const std::string& b) {
                 g.add_arc(g.condition_index(a), g.condition_index(b));
             })
        .def("has_arc",
             [](const TwoSliceGraph& g, const std::string& a, const std::string& b) {
                 return g.has_arc(g.condition_index(a), g.condition_index(b));
             })
        .def("arcs", [](const TwoSliceGraph& g) { return named_arcs(g.conditions(), g.arcs()); })
        .def_property_readonly("n_arcs", &TwoSliceGraph::n_arcs)
        .def("to_dict", [](const TwoSliceGraph& g) { return to_dict(to_json(g)); })
        .def("__eq__", [](const TwoSliceGraph& a, const TwoSliceGraph& b) { return a == b; });

    py::class_<StaticDag>(m, "StaticDag")
        .def_property_readonly("conditions", &StaticDag::conditions)
        .def("arcs", [](const StaticDag& g) { return named_arcs(g.conditions(), g.arcs()); })
        .def_property_readonly("n_arcs", &StaticDag::n_arcs);

    py::class_<FoldedGraph>(m, "FoldedGraph")
        .def_property_readonly("conditions", &FoldedGraph::conditions)
        .def("edges",
             [](const FoldedGraph& f) {
                 std::vector<std::tuple<std::string, std::string, std::string>> out;
                 for (const auto& e : f.edges())
                     out.emplace_back(f.conditions()[e.from], f.conditions()[e.to], to_string(e.kind));
                 return out;
             })
        .def("to_dot", [](const FoldedGraph& f) { return to_dot(f); });
    m.def("fold", &fold, "graph"_a);
    m.def("unfold", &unfold, "folded"_a);

    py::class_<DynamicBN>(m, "DynamicBN")
        .def_property_readonly("graph", &DynamicBN::graph)
        .def_property_readonly("conditions", &DynamicBN::conditions)
        .def("coefficient_matrix", &DynamicBN::coefficient_matrix)
        .def("intercepts", &DynamicBN::intercepts)
        .def("residual_variances", &DynamicBN::residual_variances)
        .def("predict", &DynamicBN::predict, "x0"_a)
        .def("to_dict", [](const DynamicBN& d) { return to_dict(to_json(d)); })
        .def_static("from_dict", [](const py::object& o) { return model_from_json(from_dict(o)); });

    m.def("hill_climb",
          [](const TransitionTable& t, double w, const std::string& penalty, std::size_t restarts,
             std::uint64_t seed) {
              SearchOptions opts;
              opts.restarts = restarts;
              opts.seed = seed;
              return hill_climb(t, {w, parse_penalty_convention(penalty)}, opts);
          },
          "table"_a, "w"_a = 1.0, "penalty"_a = "bic_half", "restarts"_a = 0, "seed"_a = 0);
    m.def("network_score",
          [](const TransitionTable& t, const TwoSliceGraph& g, double w, const std::string& penalty) {
              return network_score(t, g, {w, parse_penalty_convention(penalty)});
          },
          "table"_a, "graph"_a, "w"_a = 1.0, "penalty"_a = "bic_half");

    py::class_<ArcStrengthTable>(m, "ArcStrengthTable")
        .def_readonly("conditions", &ArcStrengthTable::conditions)
        .def_readonly("strengths", &ArcStrengthTable::strengths)
        .def_readwrite("threshold", &ArcStrengthTable::threshold)
        .def_readonly("replicates", &ArcStrengthTable::replicates)
        .def_readonly("failures", &ArcStrengthTable::failures);
    m.def("bootstrap_strengths",
          [](const TransitionTable& t, std::size_t replicates, double sample_fraction, double w,
             std::uint64_t seed, std::size_t threads, bool static_mode) {
              BootstrapSpec spec;
              spec.replicates = replicates;
              spec.sample_fraction = sample_fraction;
              spec.master_seed = seed;
              spec.threads = threads;
              SearchOptions opts;
              opts.mode = static_mode ? SearchMode::static_dag : SearchMode::two_slice;
              return bootstrap_strengths(t, {w, PenaltyConvention::bic_half}, opts, spec);
          },
          "table"_a, "replicates"_a = 500, "sample_fraction"_a = 0.75, "w"_a = 4.0, "seed"_a = 0,
          "threads"_a = 1, "static"_a = false);
    m.def("estimate_threshold", [](const std::vector<double>& s) { return estimate_threshold(s); }, "strengths"_a);
    m.def("consensus", py::overload_cast<const ArcStrengthTable&>(&consensus), "table"_a);
    m.def("consensus_static", py::overload_cast<const ArcStrengthTable&>(&consensus_static), "table"_a);
    m.def("fit_parameters", &fit_parameters, "graph"_a, "table"_a);
    m.def("r_squared",
          [](const DynamicBN& d, const TransitionTable& t, const std::string& target) {
              return r_squared(d, t, t.condition_index(target));
          },
          "model"_a, "table"_a, "target"_a);
    m.def("mean_r_squared", &mean_r_squared, "model"_a, "table"_a);
    m.def("variance_decomposition",
          [](const DynamicBN& d, const TransitionTable& t, const std::string& target) {
              auto dec = variance_decomposition(d, t, t.condition_index(target));
              std::vector<std::tuple<std::string, bool, double, double>> out;
              for (const auto& e : dec.entries)
                  out.emplace_back(d.conditions()[e.parent], e.self, e.raw_share, e.normalized_share);
              return out;
          },
          "model"_a, "table"_a, "target"_a,
          "Sequential shares as (parent, is_self, raw_share, normalized_share).");
    m.def("variance_components",
          [](const PanelDataset& p) {
              py::dict out;
              for (const auto& c : variance_components(p).conditions)
                  out[py::str(c.condition)] = py::dict("state"_a = c.state_share, "county"_a = c.county_share,
                                                       "county_plus_ar"_a = c.county_plus_ar_share);
              return out;
          },
          "panel"_a);

    py::class_<GroundTruthSpec>(m, "GroundTruthSpec")
        .def(py::init<>())
        .def_readwrite("n_conditions", &GroundTruthSpec::n_conditions)
        .def_readwrite("arcs_per_condition", &GroundTruthSpec::arcs_per_condition)
        .def_readwrite("county_intercept_sd", &GroundTruthSpec::county_intercept_sd)
        .def_readwrite("feedback_probability", &GroundTruthSpec::feedback_probability)
        .def_readwrite("seed", &GroundTruthSpec::seed);
    m.def("random_dbn", &random_dbn, "spec"_a);
    m.def("sample_panel", &sample_panel, "model"_a, "counties"_a, "weeks"_a, "county_intercept_sd"_a = 0.0,
          "seed"_a = 0, "threads"_a = 1);
    m.def("score_recovery",
          [](const TwoSliceGraph& truth, const TwoSliceGraph& learned) {
              auto r = score_recovery(truth, learned);
              return py::dict("precision"_a = r.arc_precision, "recall"_a = r.arc_recall,
                              "feedback_recall"_a = r.feedback_recall, "shd"_a = r.structural_hamming_distance);
          },
          "truth"_a, "learned"_a);

    auto cli_mod = m.def_submodule("cli", "Command-line entry point");
    cli_mod.def("run",
                [](const std::vector<std::string>& args) {
                    std::vector<std::string> argv{"panelbn"};
                    argv.insert(argv.end(), args.begin(), args.end());
                    std::ostringstream out, err;
                    int code = cli::run(argv, out, err);
                    return py::make_tuple(code, out.str(), err.str());
                },
                "args"_a, "Runs a subcommand; returns (exit code, stdout text, stderr text).");
}
