#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "routesig/assignment.hpp"
#include "routesig/detector.hpp"
#include "routesig/routing_trace.hpp"
#include "routesig/shadow_moe.hpp"

namespace routesig {

/// Synthetic teacher / distilled / scratch routing with known ground truth.
///
/// Every model routes each (query, layer) either through its own
/// domain-specific preferences (probability `layer_specificity[l]`) or through
/// generic preferences shared by all models. A domain's preferences boost a
/// contiguous block of ceil(E/D) experts on top of random base weights; the
/// teacher's blocks tile the experts in domain order, every other model draws
/// its block positions at random. In the domain-specific branch the distilled
/// student copies the teacher's selection with probability `relatedness` and
/// otherwise samples its own preferences, so at relatedness 0 it is
/// exchangeable with the scratch model.
struct ScenarioConfig {
    int experts = 8;
    int layers = 1;
    int top_k = 2;
    int domains = 4;
    int n_per_domain = 100;
    /// Probability that the distilled student reuses the teacher's decision.
    double relatedness = 0.9;
    /// Apply a hidden per-layer expert relabeling to the distilled student.
    bool permute_labels = true;
    std::uint64_t seed = 0;
    /// Weight added to a domain's preferred block (base weights lie in [0.1, 1]).
    double specialization_strength = 4.0;
    /// Per-layer probability of domain-specific routing; empty means 1 everywhere.
    std::vector<double> layer_specificity;
    /// Dimension of the query embeddings written for proxy training.
    int query_dim = 8;

    void validate() const;
    double specificity(int layer) const;
    std::vector<std::string> domain_labels() const;
};

struct Scenario {
    RoutingTraceSet teacher;
    RoutingTraceSet distilled;
    RoutingTraceSet scratch;
    /// model_id of the distilled member.
    std::string ground_truth;
    /// One relabeling per layer; empty when permute_labels is off.
    std::vector<Permutation> hidden_permutation;
};

struct BenchmarkScenario {
    RoutingTraceSet teacher;
    /// pairs[p].distilled is the ground-truth distilled member.
    std::vector<BenchmarkPair> pairs;
    std::vector<std::vector<Permutation>> hidden_permutations;
};

/// One teacher and `num_pairs` independent (distilled, scratch) pairs, all on
/// the same query set. Pair p uses its own named random streams, so pair 0 is
/// identical to generate_scenario() under the same config.
BenchmarkScenario generate_benchmark(const ScenarioConfig& config, int num_pairs);
Scenario generate_scenario(const ScenarioConfig& config);

/// Query embeddings for proxy training: a random centroid per domain plus noise.
QuerySet generate_queries(const ScenarioConfig& config);

struct SweepRow {
    ScenarioConfig config;
    int pairs = 0;
    double accuracy = 0.0;
    /// Mean of s(distilled) - s(scratch).
    double mean_margin = 0.0;
};

/// One row per config: generate_benchmark + detection at the last layer.
std::vector<SweepRow> sweep(const std::vector<ScenarioConfig>& configs, int pairs_per_config = 1,
                            const MatchOptions& options = {});

struct RhoSummary {
    double relatedness = 0.0;
    int trials = 0;
    double accuracy = 0.0;
    double mean_margin = 0.0;
};

/// Rows pooled by relatedness, in ascending relatedness order.
std::vector<RhoSummary> summarize_by_relatedness(const std::vector<SweepRow>& rows);

}  // namespace routesig
