#include <panelbn/cli.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <unistd.h>

#include <panelbn/analysis.hpp>
#include <panelbn/averaging.hpp>
#include <panelbn/data_model.hpp>
#include <panelbn/error.hpp>
#include <panelbn/imputation.hpp>
#include <panelbn/random.hpp>
#include <panelbn/serialization.hpp>
#include <panelbn/simulation.hpp>
#include <panelbn/structure.hpp>

#ifndef PANELBN_VERSION
#define PANELBN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace panelbn::cli {

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

namespace {

std::string num(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    if (target.has_parent_path() && !fs::exists(target.parent_path()))
        throw ValidationError("output directory does not exist: " + target.parent_path().string());
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ValidationError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string strip_json(const std::string& path) {
    if (path.size() > 5 && path.ends_with(".json")) return path.substr(0, path.size() - 5);
    return path;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || !(v > 0.0))
            throw ConfigurationError("invalid --grid entry '" + item + "'");
        grid.push_back(v);
    }
    if (grid.empty()) throw ConfigurationError("--grid is empty");
    return grid;
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "sum") return Aggregation::sum;
    if (name == "mean") return Aggregation::mean;
    throw ConfigurationError("unknown aggregation '" + name + "'");
}

// Everything a subcommand needs to record in its manifest.
struct Run {
    CLI::App* app = nullptr;
    std::vector<std::string> argv;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string started;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    void input(const std::string& path) {
        if (!path.empty()) inputs.push_back(path);
    }

    void emit(const std::string& path, const std::string& content) {
        for (const auto& in : inputs)
            if (fs::exists(in) && fs::exists(path) && fs::equivalent(in, path))
                throw ValidationError("refusing to overwrite input " + in);
        write_atomic(path, content);
        outputs.push_back(path);
    }

    Json flags() const {
        Json j = Json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string key = opt->get_lnames().front();
            if (key == "help") continue;
            if (opt->get_type_size() == 0) {
                j[key] = opt->count() > 0;
            } else if (opt->count() > 0) {
                auto results = opt->results();
                j[key] = results.size() == 1 ? Json(results.front()) : Json(results);
            } else if (!opt->get_default_str().empty()) {
                j[key] = opt->get_default_str();
            } else {
                j[key] = nullptr;
            }
        }
        return j;
    }

    void manifest(const std::string& primary) const {
        Json in = Json::array();
        for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        Json outs = Json::array();
        for (const auto& p : outputs) outs.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        Json j{{"command", app->get_name()},
               {"argv", argv},
               {"flags", flags()},
               {"seed", seed},
               {"threads", threads},
               {"inputs", in},
               {"outputs", outs},
               {"version", PANELBN_VERSION},
               {"started_at", started},
               {"finished_at", utc_now()}};
        write_atomic(primary + ".manifest.json", j.dump(2) + "\n");
    }
};

struct PanelInput {
    std::string path;
    std::string mapping;
    std::string aggregation = "sum";

    void add(CLI::App* app, bool required = true) {
        auto* opt = app->add_option("--input", path, "Panel CSV (date,state_code,county_code,<columns>...)");
        if (required) opt->required();
        opt->check(CLI::ExistingFile);
        app->add_option("--mapping", mapping, "JSON mapping of condition names to raw columns")
            ->check(CLI::ExistingFile);
        app->add_option("--aggregation", aggregation, "How mapped raw columns combine")
            ->check(CLI::IsMember({"sum", "mean"}))
            ->capture_default_str();
    }

    PanelDataset load(Run& run) const {
        run.input(path);
        if (mapping.empty()) return load_panel_file(path);
        run.input(mapping);
        std::ifstream in(mapping);
        std::stringstream text;
        text << in.rdbuf();
        return load_panel_file(path, ConditionMapping::from_json(text.str()), parse_aggregation(aggregation));
    }
};

// Sparse conditions dropped, remaining gaps imputed, regions still missing
// cells removed.
struct Preparation {
    double max_missing = 0.3;
    std::size_t k = default_ewma_window;

    void add(CLI::App* app) {
        app->add_option("--max-missing", max_missing, "Drop conditions missing more than this fraction of cells")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        app->add_option("--k", k, "EWMA imputation half-window in weeks")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }

    PanelDataset apply(const PanelDataset& raw, std::size_t threads, std::ostream& err) const {
        auto panel = drop_sparse_conditions(raw, max_missing);
        if (panel.n_conditions() < raw.n_conditions())
            err << "dropped " << raw.n_conditions() - panel.n_conditions() << " sparse condition(s)\n";
        if (!panel.complete()) {
            auto imputed = impute_panel(panel, k, threads);
            err << "imputed " << imputed.n_imputed << " cell(s), dropped " << imputed.dropped.size()
                << " series\n";
            const auto before = imputed.panel.n_regions();
            panel = drop_incomplete_regions(imputed.panel);
            if (panel.n_regions() < before)
                err << "removed " << before - panel.n_regions() << " region(s) with unimputable series\n";
        }
        return panel;
    }
};

struct SearchFlags {
    double w = 4.0;
    std::string penalty = "bic_half";
    std::optional<std::size_t> max_parents;
    std::size_t restarts = 0;

    void add(CLI::App* app) {
        app->add_option("--w", w, "Penalty weight (1 = BIC)")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--penalty", penalty, "Penalty convention")
            ->check(CLI::IsMember({"bic_half", "paper_literal"}))
            ->capture_default_str();
        app->add_option("--max-parents", max_parents, "Cap on parents per node (default unlimited)");
        app->add_option("--restarts", restarts, "Perturbed hill-climbing restarts")->capture_default_str();
    }

    PenaltyConfig config() const { return {w, parse_penalty_convention(penalty)}; }

    SearchOptions options(std::uint64_t seed, SearchMode mode) const {
        SearchOptions o;
        o.max_parents = max_parents;
        o.restarts = restarts;
        o.seed = seed;
        o.mode = mode;
        return o;
    }
};

struct BootstrapFlags {
    std::size_t replicates = 500;
    double sample_fraction = 0.75;
    bool fixed_order = false;

    void add(CLI::App* app) {
        app->add_option("--bootstrap", replicates, "Bootstrap replicates")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--sample-frac", sample_fraction, "Rows drawn per replicate as a fraction of n")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        app->add_flag("--fixed-order", fixed_order, "Keep the canonical variable order in every replicate");
    }

    BootstrapSpec spec(std::uint64_t seed, std::size_t threads) const {
        BootstrapSpec s;
        s.replicates = replicates;
        s.sample_fraction = sample_fraction;
        s.randomize_order = !fixed_order;
        s.master_seed = seed;
        s.threads = threads;
        return s;
    }
};

void add_seed(CLI::App* app, Run& run) {
    app->add_option("--seed", run.seed, "Master seed for all randomness")->capture_default_str();
}

void add_threads(CLI::App* app, Run& run) {
    app->add_option("--threads", run.threads, "Worker threads, 0 = all cores (never changes results)")
        ->capture_default_str();
}

std::vector<std::size_t> indices_for(const PanelDataset& panel, const std::vector<std::string>& names) {
    std::vector<std::size_t> keep;
    for (const auto& n : names) keep.push_back(panel.condition_index(n));
    return keep;
}

TwoSliceGraph graph_of(const Json& j) {
    if (j.contains("edges")) return unfold(folded_from_json(j));
    return any_graph_from_json(j);
}

std::size_t condition_of(const std::vector<std::string>& conditions, const std::string& name) {
    auto it = std::find(conditions.begin(), conditions.end(), name);
    if (it == conditions.end()) throw ValidationError("unknown condition '" + name + "'");
    return static_cast<std::size_t>(it - conditions.begin());
}

// ---- impute ----

struct ImputeCmd {
    PanelInput input;
    std::size_t k = default_ewma_window;
    std::string out_path;
    std::string report_path;

    void add(CLI::App* app, Run& run) {
        input.add(app);
        app->add_option("--k", k, "EWMA half-window in weeks")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--out", out_path, "Imputed panel CSV")->required();
        app->add_option("--report", report_path, "JSON report of imputed cells and dropped series");
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        const auto panel = input.load(run);
        const auto result = impute_panel(panel, k, run.threads);
        std::ostringstream csv;
        write_panel_csv(csv, result.panel);
        run.emit(out_path, csv.str());
        if (!report_path.empty()) {
            Json dropped = Json::array();
            for (const auto& d : result.dropped)
                dropped.push_back({{"condition", panel.conditions()[d.condition]},
                                   {"state_code", panel.regions()[d.region].state},
                                   {"county_code", panel.regions()[d.region].county}});
            Json report{{"k", k}, {"n_imputed", result.n_imputed}, {"dropped", dropped}};
            run.emit(report_path, report.dump(2) + "\n");
        }
        *run.out << "imputed " << result.n_imputed << " cell(s); " << result.dropped.size()
                 << " series left missing\n";
        run.manifest(out_path);
    }
};

// ---- impute-eval ----

struct ImputeEvalCmd {
    std::string input;
    std::string pattern = "single";
    double fraction = 0.05;
    std::size_t k = default_ewma_window;
    std::size_t regions = 50;
    std::size_t weeks = 104;
    std::size_t conditions = 4;
    double rho = 0.8;
    double noise = 0.1;
    std::string out_path;

    void add(CLI::App* app, Run& run) {
        app->add_option("--input", input, "Complete panel CSV; a synthetic AR(1) panel is used when omitted")
            ->check(CLI::ExistingFile);
        app->add_option("--pattern", pattern, "Missingness pattern")
            ->check(CLI::IsMember({"single", "batch4"}))
            ->capture_default_str();
        app->add_option("--fraction", fraction, "Fraction of each series to mask")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        app->add_option("--k", k, "EWMA half-window in weeks")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--regions", regions, "Synthetic panel regions")->capture_default_str();
        app->add_option("--weeks", weeks, "Synthetic panel weeks")->capture_default_str();
        app->add_option("--conditions", conditions, "Synthetic panel conditions")->capture_default_str();
        app->add_option("--rho", rho, "Synthetic AR(1) coefficient")->capture_default_str();
        app->add_option("--noise", noise, "Synthetic noise sd as a fraction of the level")->capture_default_str();
        app->add_option("--out", out_path, "JSON report (printed when omitted)");
        add_seed(app, run);
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        PanelDataset truth;
        if (input.empty()) {
            truth = ar1_panel(regions, weeks, conditions, rho, noise, derive_seed(run.seed, 0));
        } else {
            run.input(input);
            truth = drop_incomplete_regions(load_panel_file(input));
            if (truth.n_regions() == 0) throw InsufficientDataError("no fully observed regions in " + input);
        }
        const auto masked =
            inject_missing(truth, {parse_missing_pattern(pattern), fraction, derive_seed(run.seed, 1)});
        const auto imputed = impute_panel(masked.panel, k, run.threads);
        const auto report = evaluate_imputation(truth, imputed.panel, masked.mask);
        Json j = to_json(report);
        j["pattern"] = pattern;
        j["fraction"] = fraction;
        j["k"] = k;
        if (out_path.empty()) {
            *run.out << j.dump(2) << "\n";
            return;
        }
        run.emit(out_path, j.dump(2) + "\n");
        *run.out << "mean relative error " << num(report.mean_relative_error) << "\n";
        run.manifest(out_path);
    }
};

// ---- learn ----

struct LearnCmd {
    PanelInput input;
    Preparation prep;
    SearchFlags search;
    BootstrapFlags boot;
    std::string mode = "dynamic";
    std::optional<double> threshold;
    std::string out_path;

    void add(CLI::App* app, Run& run) {
        input.add(app);
        prep.add(app);
        search.add(app);
        boot.add(app);
        app->add_option("--mode", mode, "dynamic: two-slice network; static: single-slice DAG")
            ->check(CLI::IsMember({"dynamic", "static"}))
            ->capture_default_str();
        app->add_option("--threshold", threshold, "Fixed strength threshold instead of the estimated one")
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--out", out_path, "Model JSON; strengths go next to it")->required();
        add_seed(app, run);
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        const auto panel = prep.apply(input.load(run), run.threads, *run.err);
        const auto table = make_transition_table(panel);
        const SearchMode sm = mode == "static" ? SearchMode::static_dag : SearchMode::two_slice;
        const auto spec = boot.spec(run.seed, run.threads);
        auto strengths = bootstrap_strengths(table, search.config(), search.options(run.seed, sm), spec);
        if (threshold) strengths.threshold = *threshold;

        Json model;
        std::size_t n_arcs = 0;
        if (sm == SearchMode::static_dag) {
            const auto dag = consensus_static(strengths);
            n_arcs = dag.n_arcs();
            model = to_json(dag);
        } else {
            const auto graph = consensus(strengths);
            n_arcs = graph.n_arcs();
            model = to_json(fit_parameters(graph, table));
        }
        const auto stem = strip_json(out_path);
        run.emit(out_path, model.dump(2) + "\n");
        std::ostringstream csv;
        write_strengths_csv(csv, strengths);
        run.emit(stem + ".strengths.csv", csv.str());
        run.emit(stem + ".strengths.json", strengths_sidecar(strengths, spec).dump(2) + "\n");
        *run.out << "learned " << n_arcs << " arc(s) over " << table.n_conditions() << " condition(s) from "
                 << table.rows() << " transitions; threshold " << num(strengths.threshold) << "\n";
        run.manifest(out_path);
    }
};

// ---- tune-w ----

struct TuneCmd {
    PanelInput input;
    Preparation prep;
    SearchFlags search;
    std::string grid = "1,2,4,8,16,32,64,128";
    std::size_t split_week = default_split_week;
    std::string out_path;

    void add(CLI::App* app, Run& run) {
        input.add(app);
        prep.add(app);
        search.add(app);
        app->add_option("--grid", grid, "Comma-separated penalty weights")->capture_default_str();
        app->add_option("--split-week", split_week, "Week index separating training and validation")
            ->capture_default_str();
        app->add_option("--out", out_path, "CSV of w, train_R2, val_R2, arcs")->required();
        add_seed(app, run);
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        const auto w_grid = parse_grid(grid);
        const auto panel = prep.apply(input.load(run), run.threads, *run.err);
        const auto rows = tune_penalty(panel, split_week, w_grid, parse_penalty_convention(search.penalty),
                                       search.options(run.seed, SearchMode::two_slice), run.threads);
        std::ostringstream csv;
        csv << "w,train_R2,val_R2,arcs\n";
        for (const auto& r : rows)
            csv << num(r.w) << ',' << num(r.train_r2) << ',' << num(r.validation_r2) << ',' << r.arcs << '\n';
        run.emit(out_path, csv.str());
        *run.out << csv.str();
        run.manifest(out_path);
    }
};

// ---- fold ----

struct FoldCmd {
    std::string model_path;
    std::string out_path;

    void add(CLI::App* app, Run&) {
        app->add_option("--model", model_path, "Model or graph JSON")->required()->check(CLI::ExistingFile);
        app->add_option("--out", out_path, "Folded graph JSON")->required();
    }

    void operator()(Run& run) const {
        run.input(model_path);
        const auto folded = fold(graph_of(read_json_file(model_path)));
        run.emit(out_path, to_json(folded).dump(2) + "\n");
        std::size_t feedback = 0, one_way = 0, self = 0;
        for (const auto& e : folded.edges()) {
            if (e.kind == EdgeKind::feedback) ++feedback;
            else if (e.kind == EdgeKind::one_way) ++one_way;
            else ++self;
        }
        *run.out << feedback << " feedback loop(s), " << one_way << " one-way edge(s), " << self
                 << " self loop(s)\n";
        run.manifest(out_path);
    }
};

// ---- export-dot ----

struct ExportDotCmd {
    std::string model_path;
    std::string out_path;

    void add(CLI::App* app, Run&) {
        app->add_option("--model", model_path, "Model, graph or folded-graph JSON")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--out", out_path, "Graphviz DOT file")->required();
    }

    void operator()(Run& run) const {
        run.input(model_path);
        const auto j = read_json_file(model_path);
        const auto folded = j.contains("edges") ? folded_from_json(j) : fold(any_graph_from_json(j));
        run.emit(out_path, to_dot(folded));
        run.manifest(out_path);
    }
};

// ---- varprop ----

struct VarpropCmd {
    std::string model_path;
    std::string data_path;
    std::string strengths_path;
    std::string target;
    std::string stratify;
    std::vector<std::string> drivers;
    std::string method = "restricted";
    Preparation prep;
    std::string out_path;

    void add(CLI::App* app, Run& run) {
        app->add_option("--model", model_path, "Fitted model JSON")->required()->check(CLI::ExistingFile);
        app->add_option("--data", data_path, "Panel CSV whose value columns are the model's conditions")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--strengths", strengths_path, "Strengths CSV fixing the parent entry order")
            ->check(CLI::ExistingFile);
        app->add_option("--target", target, "Target condition")->required();
        app->add_option("--stratify", stratify, "Stratifier condition for quartile strata");
        app->add_option("--driver", drivers, "Driver(s) to stratify (default: every non-self parent)");
        app->add_option("--method", method, "Stratified share method")
            ->check(CLI::IsMember({"restricted", "simulation"}))
            ->capture_default_str();
        prep.add(app);
        app->add_option("--out", out_path, "CSV of shares")->required();
        add_seed(app, run);
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        run.input(model_path);
        run.input(data_path);
        const auto dbn = model_from_json(read_json_file(model_path));
        const auto raw = load_panel_file(data_path);
        const auto panel = prep.apply(raw.select_conditions(indices_for(raw, dbn.conditions())), run.threads,
                                      *run.err);
        if (panel.conditions() != dbn.conditions())
            throw PreconditionError("data is missing model conditions after preparation");
        const auto table = make_transition_table(panel);

        std::optional<ArcStrengthTable> strengths;
        if (!strengths_path.empty()) {
            run.input(strengths_path);
            std::ifstream in(strengths_path);
            strengths = read_strengths_csv(in, dbn.conditions());
        }
        const ArcStrengthTable* sp = strengths ? &*strengths : nullptr;
        const auto t = condition_of(dbn.conditions(), target);
        const auto& names = dbn.conditions();

        std::ostringstream csv;
        if (stratify.empty()) {
            const auto dec = variance_decomposition(dbn, table, t, sp);
            csv << "target,parent,kind,sum_of_squares,raw_share,normalized_share\n";
            for (const auto& e : dec.entries)
                csv << names[t] << ',' << names[e.parent] << ',' << (e.self ? "self" : "driver") << ','
                    << num(e.sum_of_squares) << ',' << num(e.raw_share) << ',' << num(e.normalized_share) << '\n';
        } else {
            StratumSpec stratum;
            stratum.stratifier = condition_of(names, stratify);
            stratum.method = method == "simulation" ? StratifyMethod::simulation : StratifyMethod::restricted_regression;
            stratum.seed = run.seed;
            std::vector<std::size_t> driver_idx;
            if (drivers.empty()) {
                for (const auto& p : dbn.node(t).parents)
                    if (p.condition != t) driver_idx.push_back(p.condition);
                std::sort(driver_idx.begin(), driver_idx.end());
            } else {
                for (const auto& d : drivers) driver_idx.push_back(condition_of(names, d));
            }
            csv << "target,driver,stratifier,unstratified,low,average,high,n_low,n_average,n_high,q1,q3\n";
            for (auto d : driver_idx) {
                const auto s = stratified_share(dbn, table, t, d, stratum, sp);
                csv << names[t] << ',' << names[d] << ',' << names[stratum.stratifier] << ',' << num(s.unstratified)
                    << ',' << num(s.low) << ',' << num(s.average) << ',' << num(s.high) << ',' << s.n_low << ','
                    << s.n_average << ',' << s.n_high << ',' << num(s.q1) << ',' << num(s.q3) << '\n';
            }
        }
        run.emit(out_path, csv.str());
        *run.out << csv.str();
        run.manifest(out_path);
    }
};

// ---- simulate ----

struct SimulateCmd {
    std::string spec_path;
    std::size_t counties = 200;
    std::size_t weeks = 100;
    std::optional<double> county_sd;
    std::string out_path;
    std::string truth_path;
    std::optional<std::uint64_t> seed;

    void add(CLI::App* app, Run& run) {
        app->add_option("--spec", spec_path, "Ground-truth spec JSON (defaults apply to absent fields)")
            ->check(CLI::ExistingFile);
        app->add_option("--counties", counties, "Counties to simulate")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--weeks", weeks, "Recorded weeks per county")->check(CLI::Range(2, 1 << 20))->capture_default_str();
        app->add_option("--county-sd", county_sd, "Override the spec's county intercept sd");
        app->add_option("--seed", seed, "Master seed (default: the spec's seed)");
        app->add_option("--out", out_path, "Simulated panel CSV")->required();
        app->add_option("--truth", truth_path, "Ground-truth model JSON");
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        GroundTruthSpec spec;
        if (!spec_path.empty()) {
            run.input(spec_path);
            spec = ground_truth_spec_from_json(read_json_file(spec_path));
        }
        if (seed) spec.seed = *seed;
        if (county_sd) spec.county_intercept_sd = *county_sd;
        run.seed = spec.seed;
        const auto truth = random_dbn(spec);
        const auto panel =
            sample_panel(truth, counties, weeks, spec.county_intercept_sd, derive_seed(spec.seed, 1), run.threads);
        std::ostringstream csv;
        write_panel_csv(csv, panel);
        run.emit(out_path, csv.str());
        if (!truth_path.empty()) run.emit(truth_path, to_json(truth).dump(2) + "\n");
        *run.out << "simulated " << counties << " counties x " << weeks << " weeks, " << truth.graph().n_arcs()
                 << " true arc(s)\n";
        run.manifest(out_path);
    }
};

// ---- compare-static ----

struct CompareStaticCmd {
    PanelInput input;
    Preparation prep;
    SearchFlags search;
    BootstrapFlags boot;
    std::string model_path;
    std::string out_path;

    void add(CLI::App* app, Run& run) {
        input.add(app);
        prep.add(app);
        search.add(app);
        boot.add(app);
        app->add_option("--model", model_path, "Dynamic model (or graph) JSON to compare against")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--out", out_path, "JSON category report")->required();
        add_seed(app, run);
        add_threads(app, run);
    }

    void operator()(Run& run) const {
        run.input(model_path);
        const auto dynamic = graph_of(read_json_file(model_path));
        const auto raw = input.load(run);
        const auto panel =
            prep.apply(raw.select_conditions(indices_for(raw, dynamic.conditions())), run.threads, *run.err);
        if (panel.conditions() != dynamic.conditions())
            throw PreconditionError("data is missing model conditions after preparation");
        const auto table = make_transition_table(panel);
        const auto spec = boot.spec(run.seed, run.threads);
        const auto strengths =
            bootstrap_strengths(table, search.config(), search.options(run.seed, SearchMode::static_dag), spec);
        const auto dag = consensus_static(strengths);
        const auto folded = fold(dynamic);
        const auto summary = compare_static(dag, folded);

        Json arcs = Json::array();
        for (const auto& a : dag.arcs()) {
            StaticDag single(dag.conditions());
            single.add_arc(a.from, a.to);
            const auto c = compare_static(single, folded);
            const char* kind = c.correct ? "correct" : c.feedback ? "feedback" : c.reversed ? "reversed" : "spurious";
            arcs.push_back({{"from", dag.conditions()[a.from]}, {"to", dag.conditions()[a.to]}, {"category", kind}});
        }
        Json report{{"total", summary.total()},
                    {"counts",
                     {{"correct", summary.correct},
                      {"feedback", summary.feedback},
                      {"reversed", summary.reversed},
                      {"spurious", summary.spurious}}},
                    {"proportions",
                     {{"correct", summary.proportion(summary.correct)},
                      {"feedback", summary.proportion(summary.feedback)},
                      {"reversed", summary.proportion(summary.reversed)},
                      {"spurious", summary.proportion(summary.spurious)}}},
                    {"threshold", strengths.threshold},
                    {"arcs", arcs}};
        run.emit(out_path, report.dump(2) + "\n");
        *run.out << summary.total() << " static arc(s): " << summary.correct << " correct, " << summary.feedback
                 << " feedback, " << summary.reversed << " reversed, " << summary.spurious << " spurious\n";
        run.manifest(out_path);
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic Bayesian networks for regional weekly panel data"};
    app.name(args.empty() ? "panelbn" : fs::path(args.front()).filename().string());
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", PANELBN_VERSION);

    Run ctx;
    ctx.out = &out;
    ctx.err = &err;
    ctx.argv = args;

    ImputeCmd impute;
    ImputeEvalCmd impute_eval;
    LearnCmd learn;
    TuneCmd tune;
    FoldCmd fold_cmd;
    VarpropCmd varprop;
    SimulateCmd simulate;
    CompareStaticCmd compare;
    ExportDotCmd export_dot;

    std::vector<std::pair<CLI::App*, std::function<void(Run&)>>> commands;
    auto reg = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        cmd.add(sub, ctx);
        commands.emplace_back(sub, [&cmd](Run& r) { cmd(r); });
    };
    reg("impute", "Fill missing weeks with an exponentially weighted moving average", impute);
    reg("impute-eval", "Measure imputation error on artificially masked cells", impute_eval);
    reg("learn", "Bootstrap-averaged structure learning and parameter fitting", learn);
    reg("tune-w", "Compare penalty weights on a temporal train/validation split", tune);
    reg("fold", "Fold a two-slice network into a cyclic graph", fold_cmd);
    reg("varprop", "Explained-variance shares of a target's parents", varprop);
    reg("simulate", "Sample a panel from a random ground-truth network", simulate);
    reg("compare-static", "Classify a static network's arcs against a dynamic model", compare);
    reg("export-dot", "Render a model or folded graph as Graphviz DOT", export_dot);

    std::vector<char*> argv;
    std::vector<std::string> storage = args.empty() ? std::vector<std::string>{"panelbn"} : args;
    for (auto& a : storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }

    try {
        for (auto& [sub, body] : commands) {
            if (!sub->parsed()) continue;
            ctx.app = sub;
            ctx.started = utc_now();
            body(ctx);
        }
        return exit_ok;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const InstabilityError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const BootstrapError& e) {
        err << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

}  // namespace panelbn::cli
