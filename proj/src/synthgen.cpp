#include "routesig/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "routesig/rng.hpp"

namespace routesig {

void ScenarioConfig::validate() const {
    if (experts < 1 || layers < 1 || domains < 1 || n_per_domain < 1)
        throw Error("scenario sizes must be positive");
    if (top_k < 1 || top_k > experts) throw Error("top_k must lie in [1, experts]");
    if (!(relatedness >= 0.0 && relatedness <= 1.0)) throw Error("relatedness must lie in [0, 1]");
    if (!(specialization_strength >= 0.0)) throw Error("specialization_strength must be nonnegative");
    if (!layer_specificity.empty() && static_cast<int>(layer_specificity.size()) != layers)
        throw Error("layer_specificity must list one value per layer");
    for (double s : layer_specificity)
        if (!(s >= 0.0 && s <= 1.0)) throw Error("layer_specificity values must lie in [0, 1]");
    if (query_dim < 1) throw Error("query_dim must be positive");
}

double ScenarioConfig::specificity(int layer) const {
    return layer_specificity.empty() ? 1.0 : layer_specificity[static_cast<std::size_t>(layer)];
}

std::vector<std::string> ScenarioConfig::domain_labels() const {
    std::vector<std::string> labels;
    for (int d = 1; d <= domains; ++d) labels.push_back("d" + std::to_string(d));
    return labels;
}

namespace {

// prefs[layer][domain] = weights over experts
using Preferences = std::vector<std::vector<Eigen::VectorXd>>;

enum class BlockPlacement { Tiled, Random };

Preferences make_preferences(const ScenarioConfig& c, Rng& rng, BlockPlacement placement) {
    const int block = (c.experts + c.domains - 1) / c.domains;
    Preferences prefs(static_cast<std::size_t>(c.layers));
    for (int l = 0; l < c.layers; ++l) {
        for (int d = 0; d < c.domains; ++d) {
            Eigen::VectorXd w(c.experts);
            for (int i = 0; i < c.experts; ++i) w(i) = rng.uniform(0.1, 1.0);
            const int start = placement == BlockPlacement::Tiled
                                  ? (d * block) % c.experts
                                  : static_cast<int>(rng.below(static_cast<std::uint64_t>(c.experts)));
            for (int j = 0; j < block; ++j) w((start + j) % c.experts) += c.specialization_strength;
            prefs[static_cast<std::size_t>(l)].push_back(std::move(w));
        }
    }
    return prefs;
}

std::vector<int> draw_top_k(const Eigen::VectorXd& weights, int k, Rng& rng) {
    Eigen::VectorXd w = weights;
    std::vector<int> chosen;
    for (int s = 0; s < k; ++s) {
        const double r = rng.uniform() * w.sum();
        double acc = 0.0;
        int pick = -1;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w(i) <= 0.0) continue;
            pick = static_cast<int>(i);
            acc += w(i);
            if (r < acc) break;
        }
        chosen.push_back(pick);
        w(pick) = 0.0;
    }
    return chosen;
}

RoutingTraceSet empty_set(const ScenarioConfig& c, std::string model_id) {
    RoutingTraceSet s;
    s.model_id = std::move(model_id);
    s.experts_per_layer.assign(static_cast<std::size_t>(c.layers), c.experts);
    s.domains = c.domain_labels();
    s.provenance.seed = c.seed;
    for (int d = 0; d < c.domains; ++d)
        for (int m = 0; m < c.n_per_domain; ++m)
            s.traces.push_back({s.domains[static_cast<std::size_t>(d)] + "-" + std::to_string(m), d, {}});
    return s;
}

// Independent model: specific draws from `own`, generic draws from `generic`.
RoutingTraceSet sample_model(const ScenarioConfig& c, std::string model_id, const Preferences& own,
                             const Preferences& generic, Rng& rng) {
    RoutingTraceSet s = empty_set(c, std::move(model_id));
    for (auto& t : s.traces) {
        for (int l = 0; l < c.layers; ++l) {
            const auto& prefs = rng.bernoulli(c.specificity(l)) ? own : generic;
            t.selections.push_back(
                {l, draw_top_k(prefs[static_cast<std::size_t>(l)][static_cast<std::size_t>(t.domain)], c.top_k, rng), {}});
        }
    }
    return s;
}

RoutingTraceSet sample_distilled(const ScenarioConfig& c, std::string model_id, const RoutingTraceSet& teacher,
                                 const Preferences& own, const Preferences& generic, Rng& rng) {
    RoutingTraceSet s = empty_set(c, std::move(model_id));
    for (std::size_t q = 0; q < s.traces.size(); ++q) {
        auto& t = s.traces[q];
        for (int l = 0; l < c.layers; ++l) {
            const auto d = static_cast<std::size_t>(t.domain);
            std::vector<int> selected;
            if (rng.bernoulli(c.specificity(l))) {
                if (rng.bernoulli(c.relatedness))
                    selected = teacher.traces[q].selections[static_cast<std::size_t>(l)].selected;
                else
                    selected = draw_top_k(own[static_cast<std::size_t>(l)][d], c.top_k, rng);
            } else {
                selected = draw_top_k(generic[static_cast<std::size_t>(l)][d], c.top_k, rng);
            }
            t.selections.push_back({l, std::move(selected), {}});
        }
    }
    return s;
}

std::string stream(int pair, const char* name) {
    return "synthgen.pair" + std::to_string(pair) + "." + name;
}

}  // namespace

BenchmarkScenario generate_benchmark(const ScenarioConfig& config, int num_pairs) {
    config.validate();
    if (num_pairs < 1) throw Error("a benchmark needs at least one pair");

    Rng generic_rng(config.seed, "synthgen.generic.prefs");
    const Preferences generic = make_preferences(config, generic_rng, BlockPlacement::Random);
    Rng teacher_pref_rng(config.seed, "synthgen.teacher.prefs");
    const Preferences teacher_prefs = make_preferences(config, teacher_pref_rng, BlockPlacement::Tiled);
    Rng teacher_rng(config.seed, "synthgen.teacher");

    BenchmarkScenario out;
    out.teacher = sample_model(config, "teacher", teacher_prefs, generic, teacher_rng);
    for (int p = 0; p < num_pairs; ++p) {
        const std::string label = "pair" + std::to_string(p + 1);
        Rng distilled_pref_rng(config.seed, stream(p, "distilled.prefs"));
        Rng scratch_pref_rng(config.seed, stream(p, "scratch.prefs"));
        Rng distilled_rng(config.seed, stream(p, "distilled"));
        Rng scratch_rng(config.seed, stream(p, "scratch"));
        const Preferences distilled_prefs = make_preferences(config, distilled_pref_rng, BlockPlacement::Random);
        const Preferences scratch_prefs = make_preferences(config, scratch_pref_rng, BlockPlacement::Random);

        BenchmarkPair pair;
        pair.label = label;
        pair.distilled = sample_distilled(config, num_pairs == 1 ? "distilled" : label + ".distilled",
                                          out.teacher, distilled_prefs, generic, distilled_rng);
        pair.scratch = sample_model(config, num_pairs == 1 ? "scratch" : label + ".scratch", scratch_prefs,
                                    generic, scratch_rng);

        std::vector<Permutation> hidden;
        if (config.permute_labels) {
            Rng perm_rng(config.seed, stream(p, "permutation"));
            for (int l = 0; l < config.layers; ++l) {
                std::vector<int> mapping(static_cast<std::size_t>(config.experts));
                std::iota(mapping.begin(), mapping.end(), 0);
                perm_rng.shuffle(std::span<int>(mapping));
                for (auto& t : pair.distilled.traces)
                    for (int& e : t.selections[static_cast<std::size_t>(l)].selected)
                        e = mapping[static_cast<std::size_t>(e)];
                hidden.push_back(make_permutation(mapping));
            }
        }
        out.pairs.push_back(std::move(pair));
        out.hidden_permutations.push_back(std::move(hidden));
    }
    return out;
}

Scenario generate_scenario(const ScenarioConfig& config) {
    BenchmarkScenario b = generate_benchmark(config, 1);
    Scenario s;
    s.teacher = std::move(b.teacher);
    s.distilled = std::move(b.pairs[0].distilled);
    s.scratch = std::move(b.pairs[0].scratch);
    s.ground_truth = s.distilled.model_id;
    s.hidden_permutation = std::move(b.hidden_permutations[0]);
    return s;
}

QuerySet generate_queries(const ScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed, "synthgen.queries");
    const auto labels = config.domain_labels();
    Eigen::MatrixXd centroids(config.query_dim, config.domains);
    for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids(i) = rng.normal();
    QuerySet qs;
    qs.inputs.resize(config.query_dim, static_cast<Eigen::Index>(config.domains) * config.n_per_domain);
    Eigen::Index col = 0;
    for (int d = 0; d < config.domains; ++d) {
        for (int m = 0; m < config.n_per_domain; ++m, ++col) {
            qs.ids.push_back(labels[static_cast<std::size_t>(d)] + "-" + std::to_string(m));
            qs.domains.push_back(labels[static_cast<std::size_t>(d)]);
            for (int i = 0; i < config.query_dim; ++i) qs.inputs(i, col) = centroids(i, d) + 0.3 * rng.normal();
        }
    }
    return qs;
}

std::vector<SweepRow> sweep(const std::vector<ScenarioConfig>& configs, int pairs_per_config,
                            const MatchOptions& options) {
    if (configs.empty()) throw Error("sweep needs at least one config");
    std::vector<SweepRow> rows;
    for (const auto& config : configs) {
        const BenchmarkScenario b = generate_benchmark(config, pairs_per_config);
        const BenchmarkReport report = run_benchmark(b.teacher, b.pairs, LayerPolicy::last(), options);
        double margin = 0.0;
        for (const auto& r : report.rows) margin += r.margin;
        rows.push_back({config, pairs_per_config, report.accuracy,
                        margin / static_cast<double>(report.rows.size())});
    }
    return rows;
}

std::vector<RhoSummary> summarize_by_relatedness(const std::vector<SweepRow>& rows) {
    struct Acc {
        int trials = 0;
        double correct = 0.0, margin = 0.0;
    };
    std::map<double, Acc> pooled;
    for (const auto& r : rows) {
        auto& a = pooled[r.config.relatedness];
        a.trials += r.pairs;
        a.correct += r.accuracy * r.pairs;
        a.margin += r.mean_margin * r.pairs;
    }
    std::vector<RhoSummary> out;
    for (const auto& [rho, a] : pooled)
        out.push_back({rho, a.trials, a.correct / a.trials, a.margin / a.trials});
    return out;
}

}  // namespace routesig
