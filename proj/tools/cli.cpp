#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "routesig/detector.hpp"
#include "routesig/report.hpp"
#include "routesig/rng.hpp"
#include "routesig/routing_trace.hpp"
#include "routesig/shadow_moe.hpp"
#include "routesig/signature_io.hpp"
#include "routesig/signatures.hpp"
#include "routesig/synthgen.hpp"
#include "routesig/transport.hpp"

namespace routesig::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

class Log {
public:
    Log(std::ostream& err, Level level) : err_(err), level_(level) {}
    void operator()(Level level, const std::string& msg) const {
        if (level > level_) return;
        static constexpr const char* names[] = {"error", "warn", "info", "debug"};
        err_ << "routesig level=" << names[static_cast<int>(level)] << " msg=\"" << msg << "\"\n";
    }

private:
    std::ostream& err_;
    Level level_;
};

Level level_from_env() {
    const char* env = std::getenv("ROUTESIG_LOG");
    if (!env) return Level::Warn;
    const std::string v = env;
    if (v == "error") return Level::Error;
    if (v == "info") return Level::Info;
    if (v == "debug") return Level::Debug;
    return Level::Warn;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

json provenance_json(const Provenance& p) {
    return {{"tool", p.tool},
            {"seed", p.seed ? json(*p.seed) : json(nullptr)},
            {"config_digest", p.config_digest}};
}

/// Digest over the run's non-path settings, so artifacts do not depend on where files live.
Provenance make_provenance(const json& settings, std::optional<std::uint64_t> seed) {
    Provenance p;
    p.seed = seed;
    p.config_digest = config_digest(settings.dump());
    return p;
}

json permutation_json(const Permutation& p) { return permutation_mapping(p); }

ShadowMoeConfig shadow_config_from(const json& j) {
    ShadowMoeConfig c;
    c.experts_per_layer = j.value("experts_per_layer", c.experts_per_layer);
    c.top_k = j.value("top_k", c.top_k);
    c.input_dim = j.value("input_dim", 0);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.output_dim = j.value("output_dim", 0);
    c.lambda = j.value("lambda", c.lambda);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    return c;
}

json shadow_config_json(const ShadowMoeConfig& c) {
    return {{"experts_per_layer", c.experts_per_layer},
            {"top_k", c.top_k},
            {"input_dim", c.input_dim},
            {"hidden_dim", c.hidden_dim},
            {"output_dim", c.output_dim},
            {"lambda", c.lambda},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"reference_learning_rate", ReferenceHyperparameters::learning_rate},
            {"reference_batch_size", ReferenceHyperparameters::batch_size},
            {"reference_epochs", ReferenceHyperparameters::epochs}};
}

ScenarioConfig scenario_config_from(const json& j) {
    ScenarioConfig c;
    c.experts = j.value("experts", c.experts);
    c.layers = j.value("layers", c.layers);
    c.top_k = j.value("top_k", c.top_k);
    c.domains = j.value("domains", c.domains);
    c.n_per_domain = j.value("n_per_domain", c.n_per_domain);
    c.relatedness = j.value("relatedness", c.relatedness);
    c.permute_labels = j.value("permute_labels", c.permute_labels);
    c.seed = j.value("seed", c.seed);
    c.specialization_strength = j.value("specialization_strength", c.specialization_strength);
    c.layer_specificity = j.value("layer_specificity", c.layer_specificity);
    c.query_dim = j.value("query_dim", c.query_dim);
    c.validate();
    return c;
}

json scenario_config_json(const ScenarioConfig& c) {
    return {{"experts", c.experts},
            {"layers", c.layers},
            {"top_k", c.top_k},
            {"domains", c.domains},
            {"n_per_domain", c.n_per_domain},
            {"relatedness", c.relatedness},
            {"permute_labels", c.permute_labels},
            {"seed", c.seed},
            {"specialization_strength", c.specialization_strength},
            {"layer_specificity", c.layer_specificity},
            {"query_dim", c.query_dim}};
}

// ---------------------------------------------------------------------------
// Oracles for train-proxy.

struct OracleTargets {
    Eigen::MatrixXd targets;
    json settings;
};

OracleTargets oracle_targets(const fs::path& spec_path, const QuerySet& queries, ShadowMoeConfig& config) {
    const json spec = read_json_file(spec_path);
    const fs::path base = spec_path.parent_path();
    const std::string kind = spec.value("kind", std::string{});
    OracleTargets out;
    out.settings = spec;

    if (kind == "routing") {
        // The black box answers each query with its binary activation vector.
        const RoutingTraceSet traces = ingest_traces(base / spec.at("traces").get<std::string>());
        const int layer = LayerPolicy::parse(spec.value("layer", std::string("last"))).resolve(traces.num_layers());
        const int experts = traces.experts_per_layer[static_cast<std::size_t>(layer)];
        if (config.output_dim == 0) config.output_dim = experts;
        if (config.output_dim != experts)
            throw Error("routing oracle answers with " + std::to_string(experts) + " outputs");
        const double scale = spec.value("scale", 1.0);
        std::unordered_map<std::string, const QueryTrace*> by_id;
        for (const auto& t : traces.traces) by_id.emplace(t.query_id, &t);
        out.targets = Eigen::MatrixXd::Zero(experts, static_cast<Eigen::Index>(queries.size()));
        for (std::size_t q = 0; q < queries.size(); ++q) {
            auto it = by_id.find(queries.ids[q]);
            if (it == by_id.end()) throw Error("routing oracle has no answer for query '" + queries.ids[q] + "'");
            for (int e = 0; e < experts; ++e)
                out.targets(e, static_cast<Eigen::Index>(q)) = scale * binary_activation(*it->second, layer, e);
        }
        out.settings.erase("traces");
        return out;
    }

    Oracle oracle;
    if (kind == "model") {
        auto model = std::make_shared<ShadowMoeModel>(load_model(base / spec.at("path").get<std::string>()));
        if (config.output_dim == 0) config.output_dim = model->config().output_dim;
        oracle = [model](const Eigen::VectorXd& x) { return model->forward(x).output; };
        out.settings.erase("path");
    } else if (kind == "linear") {
        if (config.output_dim == 0) config.output_dim = spec.value("output_dim", 4);
        Rng rng(spec.value("seed", std::uint64_t{0}), "oracle.linear");
        Eigen::MatrixXd a(config.output_dim, config.input_dim);
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal() / std::sqrt(static_cast<double>(config.input_dim));
        Eigen::VectorXd c(config.output_dim);
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rng.normal();
        oracle = [a, c](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x + c; };
    } else {
        throw Error("oracle kind must be one of routing, model, linear");
    }
    out.targets.resize(config.output_dim, static_cast<Eigen::Index>(queries.size()));
    for (Eigen::Index q = 0; q < queries.inputs.cols(); ++q) out.targets.col(q) = oracle(queries.inputs.col(q));
    return out;
}

// ---------------------------------------------------------------------------

struct Common {
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int verbose = 0;
};

MatchOptions match_options(const std::string& mode, const Common& common) {
    MatchOptions o;
    o.mode = parse_match_mode(mode);
    o.threads = common.threads;
    return o;
}

json score_json(const DetectionScore& s) {
    return {{"candidate_id", s.candidate_id},
            {"score", s.score},
            {"d_spec", s.d_spec},
            {"d_collab", s.d_collab ? json(*s.d_collab) : json(nullptr)}};
}

BenchmarkReport run_manifest(const fs::path& dir, const json& manifest, const std::string& layer_override,
                             const std::string& mode_override, const Common& common) {
    const RoutingTraceSet teacher = ingest_traces(dir / manifest.at("teacher").get<std::string>());
    std::vector<BenchmarkPair> pairs;
    for (const auto& p : manifest.at("pairs")) {
        if (!p.contains("kd") || !p.contains("scratch"))
            throw Error("benchmark pair is missing its kd or scratch member");
        pairs.push_back({p.at("label").get<std::string>(), ingest_traces(dir / p.at("kd").get<std::string>()),
                         ingest_traces(dir / p.at("scratch").get<std::string>())});
    }
    const std::string layer = layer_override.empty() ? manifest.value("layer", std::string("last")) : layer_override;
    const std::string mode = mode_override.empty() ? manifest.value("mode", std::string("auto")) : mode_override;
    return run_benchmark(teacher, pairs, LayerPolicy::parse(layer), match_options(mode, common));
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Routing-signature knowledge-distillation detector for sparse MoE models", "routesig"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_version()));

    Common common;
    app.add_option("--threads", common.threads, "Worker cap for exhaustive matching")->check(CLI::PositiveNumber);
    app.add_option("--seed", common.seed, "Root seed recorded into artifacts")->each([&](const std::string&) {
        common.seed_given = true;
    });
    app.add_flag("-v,--verbose", common.verbose, "More log output (repeatable)");

    std::string input, output, format = "json", layer = "last", mode = "auto";
    std::string teacher, student, cand1, cand2, oracle, queries, config, traces_out, out_dir, grid;
    std::string summary, benchmark, model_id, loss_out;

    auto* ingest = app.add_subcommand("ingest", "Validate and normalize a routing trace file");
    ingest->add_option("--input", input, "Trace file")->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", output, "Normalized trace file")->required();

    auto* profile = app.add_subcommand("profile", "Compute specialization and collaboration signatures");
    profile->add_option("--traces", input, "Trace file")->required()->check(CLI::ExistingFile);
    profile->add_option("--layer", layer, "first | median | last | <index>");
    profile->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
    profile->add_option("--out", output, "Output file")->required();

    auto* distance = app.add_subcommand("distance", "Permutation-invariant distances between two signature files");
    distance->add_option("--teacher", teacher, "Teacher signature file")->required()->check(CLI::ExistingFile);
    distance->add_option("--student", student, "Student signature file")->required()->check(CLI::ExistingFile);
    distance->add_option("--mode", mode, "auto | exact | heuristic")->check(CLI::IsMember({"auto", "exact", "heuristic"}));
    distance->add_option("--out", output, "Distance report (JSON)")->required();

    auto* detect = app.add_subcommand("detect", "Pick the candidate more likely distilled from the teacher");
    detect->add_option("--teacher", teacher, "Teacher traces")->required()->check(CLI::ExistingFile);
    detect->add_option("--cand1", cand1, "Candidate 1 traces")->required()->check(CLI::ExistingFile);
    detect->add_option("--cand2", cand2, "Candidate 2 traces")->required()->check(CLI::ExistingFile);
    detect->add_option("--layer", layer, "first | median | last | <index>");
    detect->add_option("--mode", mode, "auto | exact | heuristic")->check(CLI::IsMember({"auto", "exact", "heuristic"}));
    detect->add_option("--out", output, "Verdict file (JSON); stdout when omitted");

    auto* train = app.add_subcommand("train-proxy", "Train a shadow MoE proxy against a black-box oracle");
    train->add_option("--oracle", oracle, "Oracle spec (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--queries", queries, "Query file")->required()->check(CLI::ExistingFile);
    train->add_option("--config", config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", output, "Model file")->required();
    train->add_option("--traces", traces_out, "Exported routing traces")->required();
    train->add_option("--model-id", model_id, "model_id written into the traces");
    train->add_option("--loss", loss_out, "Per-epoch loss curve (CSV)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic teacher/distilled/scratch scenario");
    synth->add_option("--config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    synth->add_option("--out-dir", out_dir, "Output directory")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "Detection accuracy over a relatedness grid");
    sweep_cmd->add_option("--grid", grid, "Grid file (JSON)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", output, "Per-config table (CSV)")->required();
    sweep_cmd->add_option("--summary", summary, "Per-relatedness table (CSV)");

    auto* report = app.add_subcommand("report", "Run a benchmark directory and emit the pairwise report");
    report->add_option("--benchmark", benchmark, "Directory holding benchmark.json")->required()->check(CLI::ExistingDirectory);
    report->add_option("--out", output, "Report file")->required();
    std::string report_format = "csv";
    report->add_option("--format", report_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--layer", layer, "Override the manifest's layer policy");
    report->add_option("--mode", mode, "Override the manifest's match mode");
    // Empty defaults let the manifest decide.
    bool report_layer_given = false, report_mode_given = false;
    report->get_option("--layer")->each([&](const std::string&) { report_layer_given = true; });
    report->get_option("--mode")->each([&](const std::string&) { report_mode_given = true; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string what = e.what();
        // Name a mistyped subcommand instead of reporting a missing one.
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--threads" || args[i] == "--seed") {
                ++i;
            } else if (!args[i].empty() && args[i][0] != '-') {
                if (!app.get_subcommand_no_throw(args[i])) what = "unknown subcommand '" + args[i] + "'";
                break;
            }
        }
        err << "error: " << what << "\n\n" << app.help();
        return 2;
    }

    const Level level = common.verbose >= 2 ? Level::Debug : common.verbose == 1 ? Level::Info : level_from_env();
    const Log log(err, level);
    const std::optional<std::uint64_t> cli_seed =
        common.seed_given ? std::optional<std::uint64_t>(common.seed) : std::optional<std::uint64_t>(0);

    try {
        if (ingest->parsed()) {
            RoutingTraceSet set = ingest_traces(input);
            set.provenance = make_provenance({{"subcommand", "ingest"}, {"schema", kTraceSchema}}, cli_seed);
            write_traces(output, set);
            log(Level::Info, "ingested " + std::to_string(set.size()) + " queries over " +
                                 std::to_string(set.num_layers()) + " layers");
        } else if (profile->parsed()) {
            const RoutingTraceSet set = ingest_traces(input);
            const LayerPolicy policy = LayerPolicy::parse(layer);
            const SignatureBundle bundle = signature_bundle(set, policy);
            std::ofstream f(output, std::ios::binary);
            if (!f) throw Error("cannot write " + output);
            if (format == "csv") {
                const Provenance p = make_provenance({{"subcommand", "profile"}, {"layer", layer}, {"format", format}}, cli_seed);
                f << "# tool=" << p.tool << "\n# seed=" << *p.seed << "\n# config_digest=" << p.config_digest
                  << "\n# model_id=" << bundle.model_id << " layer=" << bundle.specialization.layer << '\n';
                write_profile_csv(f, bundle.specialization);
            } else {
                write_signature(f, bundle,
                                make_provenance({{"subcommand", "profile"}, {"layer", layer}, {"format", format}}, cli_seed));
            }
            log(Level::Info, "profiled layer " + std::to_string(bundle.specialization.layer));
        } else if (distance->parsed()) {
            const SignatureBundle t = read_signature(fs::path(teacher));
            const SignatureBundle s = read_signature(fs::path(student));
            const SignatureDistance d = signature_distance(t, s, match_options(mode, common));
            json j;
            j["provenance"] = provenance_json(make_provenance({{"subcommand", "distance"}, {"mode", mode}}, cli_seed));
            j["teacher"] = t.model_id;
            j["student"] = s.model_id;
            j["mode"] = mode;
            j["method"] = to_string(d.method);
            j["d_spec"] = d.d_spec;
            j["d_collab"] = d.d_collab ? json(*d.d_collab) : json(nullptr);
            j["spec_permutation"] = permutation_json(d.spec_permutation);
            j["collab_permutation"] = d.collab_permutation ? permutation_json(*d.collab_permutation) : json(nullptr);
            write_json_file(output, j);
        } else if (detect->parsed()) {
            const LayerPolicy policy = LayerPolicy::parse(layer);
            const SignatureBundle t = signature_bundle(ingest_traces(teacher), policy);
            const SignatureBundle c1 = signature_bundle(ingest_traces(cand1), policy);
            const SignatureBundle c2 = signature_bundle(ingest_traces(cand2), policy);
            const PairVerdict v = detect_pair(t, c1, c2, match_options(mode, common));
            json j;
            j["provenance"] = provenance_json(
                make_provenance({{"subcommand", "detect"}, {"layer", layer}, {"mode", mode}}, cli_seed));
            j["teacher"] = t.model_id;
            j["layer"] = t.specialization.layer;
            j["mode"] = mode;
            j["predicted"] = v.predicted;
            j["predicted_model_id"] = v.scores[static_cast<std::size_t>(v.predicted - 1)].candidate_id;
            j["margin"] = v.margin;
            j["tie"] = v.tie;
            j["scores"] = {score_json(v.scores[0]), score_json(v.scores[1])};
            if (output.empty())
                out << j.dump(2) << '\n';
            else
                write_json_file(output, j);
            log(Level::Info, "predicted candidate " + std::to_string(v.predicted));
        } else if (train->parsed()) {
            const json cfg = read_json_file(config);
            ShadowMoeConfig c = shadow_config_from(cfg);
            const QuerySet qs = read_queries(queries);
            if (c.input_dim == 0) c.input_dim = static_cast<int>(qs.inputs.rows());
            const OracleTargets targets = oracle_targets(oracle, qs, c);
            c.validate();
            log(Level::Info, "training proxy on " + std::to_string(qs.size()) + " queries");
            const TrainResult r = train_proxy(qs.inputs, targets.targets, c);
            save_model(output, r.model);
            const std::string id = model_id.empty() ? fs::path(output).stem().string() : model_id;
            RoutingTraceSet set = export_traces(r.model, qs, id);
            set.provenance = make_provenance(
                {{"subcommand", "train-proxy"}, {"config", shadow_config_json(c)}, {"oracle", targets.settings}}, c.seed);
            write_traces(traces_out, set);
            if (!loss_out.empty()) {
                std::ofstream f(loss_out, std::ios::binary);
                if (!f) throw Error("cannot write " + loss_out);
                f << "# tool=" << set.provenance.tool << "\n# seed=" << c.seed
                  << "\n# config_digest=" << set.provenance.config_digest << "\nepoch,objective,distill\n";
                for (std::size_t e = 0; e < r.objective_curve.size(); ++e)
                    f << e << ',' << format_number(r.objective_curve[e]) << ',' << format_number(r.distill_curve[e]) << '\n';
            }
            log(Level::Info, "final objective " + format_number(r.objective_curve.back()));
        } else if (synth->parsed()) {
            const json cfg = read_json_file(config);
            const ScenarioConfig c = scenario_config_from(cfg);
            const int num_pairs = cfg.value("pairs", 1);
            const Provenance prov = make_provenance(
                {{"subcommand", "synth"}, {"config", scenario_config_json(c)}, {"pairs", num_pairs}}, c.seed);
            BenchmarkScenario b = generate_benchmark(c, num_pairs);
            const fs::path dir(out_dir);
            fs::create_directories(dir);
            b.teacher.provenance = prov;
            write_traces(dir / "teacher.jsonl", b.teacher);
            QuerySet qs = generate_queries(c);
            write_queries(dir / "queries.jsonl", qs);

            Rng blind(c.seed, "synthgen.blind");
            json manifest, bench_pairs = json::array(), truth = json::array();
            for (std::size_t p = 0; p < b.pairs.size(); ++p) {
                auto& pair = b.pairs[p];
                const bool distilled_first = blind.bernoulli(0.5);
                const std::string kd_id = pair.label + (distilled_first ? "_cand1" : "_cand2");
                const std::string scratch_id = pair.label + (distilled_first ? "_cand2" : "_cand1");
                pair.distilled.model_id = kd_id;
                pair.scratch.model_id = scratch_id;
                pair.distilled.provenance = prov;
                pair.scratch.provenance = prov;
                write_traces(dir / (kd_id + ".jsonl"), pair.distilled);
                write_traces(dir / (scratch_id + ".jsonl"), pair.scratch);
                json hidden = json::array();
                for (const auto& perm : b.hidden_permutations[p]) hidden.push_back(permutation_json(perm));
                truth.push_back({{"label", pair.label},
                                 {"distilled", kd_id},
                                 {"scratch", scratch_id},
                                 {"hidden_permutation", hidden}});
                bench_pairs.push_back({{"label", pair.label}, {"kd", kd_id + ".jsonl"}, {"scratch", scratch_id + ".jsonl"}});
            }
            manifest["schema"] = "routesig.manifest/1";
            manifest["provenance"] = provenance_json(prov);
            manifest["config"] = scenario_config_json(c);
            manifest["teacher"] = "teacher.jsonl";
            manifest["queries"] = "queries.jsonl";
            manifest["pairs"] = truth;
            write_json_file(dir / "manifest.json", manifest);
            write_json_file(dir / "benchmark.json", {{"schema", "routesig.benchmark/1"},
                                                     {"seed", c.seed},
                                                     {"teacher", "teacher.jsonl"},
                                                     {"layer", "last"},
                                                     {"mode", "auto"},
                                                     {"pairs", bench_pairs}});
            log(Level::Info, "wrote scenario with " + std::to_string(b.pairs.size()) + " pair(s)");
        } else if (sweep_cmd->parsed()) {
            const json g = read_json_file(grid);
            const ScenarioConfig base = scenario_config_from(g.value("base", json::object()));
            std::vector<std::uint64_t> seeds;
            if (g.contains("seeds") && g["seeds"].is_array()) {
                seeds = g["seeds"].get<std::vector<std::uint64_t>>();
            } else {
                const auto count = g.value("seeds", 1);
                for (int s = 0; s < count; ++s) seeds.push_back(base.seed + static_cast<std::uint64_t>(s));
            }
            const auto rhos = g.value("relatedness", std::vector<double>{base.relatedness});
            const int pairs = g.value("pairs", 1);
            const std::string grid_mode = g.value("mode", std::string("auto"));
            std::vector<ScenarioConfig> configs;
            for (double rho : rhos) {
                for (auto s : seeds) {
                    ScenarioConfig c = base;
                    c.relatedness = rho;
                    c.seed = s;
                    configs.push_back(c);
                }
            }
            const auto rows = routesig::sweep(configs, pairs, match_options(grid_mode, common));
            const Provenance prov = make_provenance({{"subcommand", "sweep"}, {"grid", g}}, base.seed);
            auto header = [&prov](std::ostream& f) {
                f << "# tool=" << prov.tool << "\n# seed=" << *prov.seed << "\n# config_digest=" << prov.config_digest
                  << '\n';
            };
            std::ofstream f(output, std::ios::binary);
            if (!f) throw Error("cannot write " + output);
            header(f);
            f << "relatedness,seed,pairs,accuracy,mean_margin\n";
            for (const auto& r : rows)
                f << format_number(r.config.relatedness) << ',' << r.config.seed << ',' << r.pairs << ','
                  << format_number(r.accuracy) << ',' << format_number(r.mean_margin) << '\n';
            if (!summary.empty()) {
                std::ofstream s(summary, std::ios::binary);
                if (!s) throw Error("cannot write " + summary);
                header(s);
                s << "relatedness,trials,accuracy,mean_margin\n";
                for (const auto& r : summarize_by_relatedness(rows))
                    s << format_number(r.relatedness) << ',' << r.trials << ',' << format_number(r.accuracy) << ','
                      << format_number(r.mean_margin) << '\n';
            }
        } else if (report->parsed()) {
            const fs::path dir(benchmark);
            const json manifest = read_json_file(dir / "benchmark.json");
            const BenchmarkReport r = run_manifest(dir, manifest, report_layer_given ? layer : "",
                                                   report_mode_given ? mode : "", common);
            json settings = manifest;
            settings["subcommand"] = "report";
            settings["layer"] = r.layer;
            settings["mode"] = to_string(r.options.mode);
            std::optional<std::uint64_t> seed;
            if (manifest.contains("seed")) seed = manifest["seed"].get<std::uint64_t>();
            emit_report(output, r, make_provenance(settings, seed),
                        report_format == "json" ? ReportFormat::Json : ReportFormat::Csv);
            log(Level::Info, "accuracy " + format_number(r.accuracy) + " over " + std::to_string(r.rows.size()) +
                                 " pair(s)");
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace routesig::cli
