#ifndef PANELBN_SERIALIZATION_HPP
#define PANELBN_SERIALIZATION_HPP

#include <iosfwd>
#include <string>

#include <json.hpp>

#include <panelbn/analysis.hpp>
#include <panelbn/averaging.hpp>
#include <panelbn/imputation.hpp>
#include <panelbn/simulation.hpp>
#include <panelbn/structure.hpp>

namespace panelbn {

using Json = nlohmann::ordered_json;

// Graph JSON:
//   {"conditions": [...],
//    "arcs": [{"from": {"condition": "A", "slice": 0},
//              "to":   {"condition": "B", "slice": 1}}, ...]}
Json to_json(const TwoSliceGraph& graph);
TwoSliceGraph graph_from_json(const Json& j);

// {"conditions": [...], "edges": [{"from": "A", "to": "B", "kind": "feedback"}, ...]}
Json to_json(const FoldedGraph& folded);
FoldedGraph folded_from_json(const Json& j);

// {"conditions": [...], "arcs": [{"from": "A", "to": "B"}, ...]}
Json to_json(const StaticDag& dag);
StaticDag static_from_json(const Json& j);

// Model JSON: graph fields plus
//   "nodes": [{"target": {...}, "parents": [{...}], "intercept": mu,
//              "coefficients": [...], "residual_variance": s2}, ...]
Json to_json(const DynamicBN& dbn);
DynamicBN model_from_json(const Json& j);

/// Reads either a model JSON or a bare graph JSON, returning the graph.
TwoSliceGraph any_graph_from_json(const Json& j);

Json to_json(const GroundTruthSpec& spec);
GroundTruthSpec ground_truth_spec_from_json(const Json& j);

Json to_json(const ImputationReport& report);

/// `from,to,strength` rows in canonical (from, to) order.
void write_strengths_csv(std::ostream& out, const ArcStrengthTable& table);
ArcStrengthTable read_strengths_csv(std::istream& in, const std::vector<std::string>& conditions);

/// Threshold sidecar: threshold, replicates, failures, mode and the
/// bootstrap settings that produced the table.
Json strengths_sidecar(const ArcStrengthTable& table, const BootstrapSpec& spec);

/// Graphviz rendering of a folded graph: feedback pairs as dir=both, self
/// loops as node-to-self edges, one-way arcs drawn with a heavier pen.
std::string to_dot(const FoldedGraph& folded);

Json read_json_file(const std::string& path);

}  // namespace panelbn

#endif  // PANELBN_SERIALIZATION_HPP
