#include <panelbn/serialization.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <panelbn/error.hpp>

namespace panelbn {

namespace {

std::size_t index_of(const std::vector<std::string>& conditions, const std::string& name) {
    auto it = std::find(conditions.begin(), conditions.end(), name);
    if (it == conditions.end()) throw ValidationError("unknown condition '" + name + "'");
    return static_cast<std::size_t>(it - conditions.begin());
}

Json node_json(NodeRef node, const std::vector<std::string>& conditions) {
    return Json{{"condition", conditions.at(node.condition)}, {"slice", node.slice == Slice::t0 ? 0 : 1}};
}

NodeRef node_from(const Json& j, const std::vector<std::string>& conditions) {
    const int slice = j.at("slice").get<int>();
    if (slice != 0 && slice != 1) throw ValidationError("slice must be 0 or 1");
    return {index_of(conditions, j.at("condition").get<std::string>()), slice == 0 ? Slice::t0 : Slice::t1};
}

std::vector<std::string> conditions_from(const Json& j) {
    auto names = j.at("conditions").get<std::vector<std::string>>();
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("duplicate condition names in JSON");
    return names;
}

// nlohmann::json reports type and key errors with its own exception types.
template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed ") + what + " JSON: " + e.what());
    }
}

}  // namespace

Json to_json(const TwoSliceGraph& graph) {
    Json arcs = Json::array();
    for (const auto& a : graph.arcs())
        arcs.push_back({{"from", node_json(at_t0(a.from), graph.conditions())},
                        {"to", node_json(at_t1(a.to), graph.conditions())}});
    return Json{{"conditions", graph.conditions()}, {"arcs", arcs}};
}

TwoSliceGraph graph_from_json(const Json& j) {
    return guarded("graph", [&] {
        TwoSliceGraph graph(conditions_from(j));
        for (const auto& a : j.at("arcs"))
            graph.add_arc(node_from(a.at("from"), graph.conditions()), node_from(a.at("to"), graph.conditions()));
        return graph;
    });
}

Json to_json(const FoldedGraph& folded) {
    Json edges = Json::array();
    for (const auto& e : folded.edges())
        edges.push_back({{"from", folded.conditions()[e.from]},
                         {"to", folded.conditions()[e.to]},
                         {"kind", to_string(e.kind)}});
    return Json{{"conditions", folded.conditions()}, {"edges", edges}};
}

FoldedGraph folded_from_json(const Json& j) {
    return guarded("folded graph", [&] {
        FoldedGraph folded(conditions_from(j));
        for (const auto& e : j.at("edges"))
            folded.add_edge(index_of(folded.conditions(), e.at("from").get<std::string>()),
                            index_of(folded.conditions(), e.at("to").get<std::string>()),
                            parse_edge_kind(e.at("kind").get<std::string>()));
        return folded;
    });
}

Json to_json(const StaticDag& dag) {
    Json arcs = Json::array();
    for (const auto& a : dag.arcs())
        arcs.push_back({{"from", dag.conditions()[a.from]}, {"to", dag.conditions()[a.to]}});
    return Json{{"conditions", dag.conditions()}, {"arcs", arcs}};
}

StaticDag static_from_json(const Json& j) {
    return guarded("static DAG", [&] {
        StaticDag dag(conditions_from(j));
        for (const auto& a : j.at("arcs"))
            dag.add_arc(index_of(dag.conditions(), a.at("from").get<std::string>()),
                        index_of(dag.conditions(), a.at("to").get<std::string>()));
        return dag;
    });
}

Json to_json(const DynamicBN& dbn) {
    Json j = to_json(dbn.graph());
    Json nodes = Json::array();
    for (const auto& node : dbn.nodes()) {
        Json parents = Json::array();
        for (const auto& p : node.parents) parents.push_back(node_json(p, dbn.conditions()));
        std::vector<double> coefficients(node.coefficients.data(), node.coefficients.data() + node.coefficients.size());
        nodes.push_back({{"target", node_json(node.target, dbn.conditions())},
                         {"parents", parents},
                         {"intercept", node.intercept},
                         {"coefficients", coefficients},
                         {"residual_variance", node.residual_variance}});
    }
    j["nodes"] = nodes;
    return j;
}

DynamicBN model_from_json(const Json& j) {
    return guarded("model", [&] {
        auto graph = graph_from_json(j);
        std::vector<GaussianNodeModel> nodes(graph.n_conditions());
        std::vector<char> seen(graph.n_conditions(), 0);
        for (const auto& n : j.at("nodes")) {
            GaussianNodeModel node;
            node.target = node_from(n.at("target"), graph.conditions());
            if (node.target.slice != Slice::t1) throw ValidationError("node models describe slice-1 nodes");
            for (const auto& p : n.at("parents")) node.parents.push_back(node_from(p, graph.conditions()));
            auto coefficients = n.at("coefficients").get<std::vector<double>>();
            node.coefficients = Eigen::Map<const Eigen::VectorXd>(coefficients.data(),
                                                                  static_cast<Eigen::Index>(coefficients.size()));
            node.intercept = n.at("intercept").get<double>();
            node.residual_variance = n.at("residual_variance").get<double>();
            if (seen[node.target.condition]) throw ValidationError("duplicate node model");
            seen[node.target.condition] = 1;
            nodes[node.target.condition] = std::move(node);
        }
        if (std::count(seen.begin(), seen.end(), 1) != static_cast<std::ptrdiff_t>(seen.size()))
            throw ValidationError("model JSON must hold one node model per condition");
        return DynamicBN(std::move(graph), std::move(nodes));
    });
}

TwoSliceGraph any_graph_from_json(const Json& j) { return graph_from_json(j); }

Json to_json(const GroundTruthSpec& spec) {
    return Json{{"n_conditions", spec.n_conditions},
                {"arcs_per_condition", spec.arcs_per_condition},
                {"coefficient_range", {spec.coefficient_range.lo, spec.coefficient_range.hi}},
                {"noise_sd_range", {spec.noise_sd_range.lo, spec.noise_sd_range.hi}},
                {"county_intercept_sd", spec.county_intercept_sd},
                {"seed", spec.seed},
                {"feedback_probability", spec.feedback_probability},
                {"max_spectral_radius", spec.max_spectral_radius},
                {"level_sd_range", {spec.level_sd_range.lo, spec.level_sd_range.hi}}};
}

GroundTruthSpec ground_truth_spec_from_json(const Json& j) {
    return guarded("ground-truth spec", [&] {
        GroundTruthSpec spec;
        auto interval = [&](const char* key, Interval& out) {
            if (!j.contains(key)) return;
            auto v = j.at(key).get<std::vector<double>>();
            if (v.size() != 2) throw ValidationError(std::string(key) + " must be [lo, hi]");
            out = {v[0], v[1]};
        };
        if (j.contains("n_conditions")) spec.n_conditions = j.at("n_conditions").get<std::size_t>();
        if (j.contains("arcs_per_condition")) spec.arcs_per_condition = j.at("arcs_per_condition").get<double>();
        interval("coefficient_range", spec.coefficient_range);
        interval("noise_sd_range", spec.noise_sd_range);
        interval("level_sd_range", spec.level_sd_range);
        if (j.contains("county_intercept_sd")) spec.county_intercept_sd = j.at("county_intercept_sd").get<double>();
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("feedback_probability"))
            spec.feedback_probability = j.at("feedback_probability").get<double>();
        if (j.contains("max_spectral_radius")) spec.max_spectral_radius = j.at("max_spectral_radius").get<double>();
        return spec;
    });
}

Json to_json(const ImputationReport& report) {
    Json per = Json::object();
    for (const auto& [k, v] : report.per_condition_error) per[k] = v;
    return Json{{"mean_relative_error", report.mean_relative_error},
                {"per_condition_error", per},
                {"n_imputed", report.n_imputed},
                {"n_dropped_series", report.n_dropped_series},
                {"n_zero_truth", report.n_zero_truth}};
}

void write_strengths_csv(std::ostream& out, const ArcStrengthTable& table) {
    out << "from,to,strength\n";
    char buf[64];
    const auto p = table.conditions.size();
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            if (table.mode == SearchMode::static_dag && i == j) continue;
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, table.strength(i, j));
            out << table.conditions[i] << ',' << table.conditions[j] << ',';
            out.write(buf, ptr - buf);
            out << '\n';
        }
}

ArcStrengthTable read_strengths_csv(std::istream& in, const std::vector<std::string>& conditions) {
    ArcStrengthTable table;
    table.conditions = conditions;
    const auto p = static_cast<Eigen::Index>(conditions.size());
    table.strengths = Eigen::MatrixXd::Zero(p, p);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (line_no == 1 && line.rfind("from,", 0) == 0)) continue;
        std::stringstream ss(line);
        std::string from, to, value;
        if (!std::getline(ss, from, ',') || !std::getline(ss, to, ',') || !std::getline(ss, value))
            throw ParseError("expected from,to,strength", line_no);
        double s = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
        if (ec != std::errc() || !(s >= 0.0 && s <= 1.0)) throw ParseError("invalid strength '" + value + "'", line_no);
        table.strengths(static_cast<Eigen::Index>(index_of(conditions, from)),
                        static_cast<Eigen::Index>(index_of(conditions, to))) = s;
    }
    return table;
}

Json strengths_sidecar(const ArcStrengthTable& table, const BootstrapSpec& spec) {
    return Json{{"threshold", table.threshold},
                {"replicates", spec.replicates},
                {"successful_replicates", table.replicates},
                {"failures", table.failures},
                {"sample_fraction", spec.sample_fraction},
                {"randomize_order", spec.randomize_order},
                {"master_seed", spec.master_seed},
                {"mode", table.mode == SearchMode::two_slice ? "two_slice" : "static_dag"}};
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

std::string to_dot(const FoldedGraph& folded) {
    std::ostringstream out;
    out << "digraph folded {\n";
    out << "  node [shape=ellipse];\n";
    for (const auto& c : folded.conditions()) out << "  " << quoted(c) << ";\n";
    for (const auto& e : folded.edges()) {
        out << "  " << quoted(folded.conditions()[e.from]) << " -> " << quoted(folded.conditions()[e.to]);
        switch (e.kind) {
            case EdgeKind::feedback: out << " [dir=both]"; break;
            case EdgeKind::one_way: out << " [penwidth=3]"; break;
            case EdgeKind::self_loop: break;
        }
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
}

}  // namespace panelbn
