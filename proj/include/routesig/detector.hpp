#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "routesig/routing_trace.hpp"
#include "routesig/signatures.hpp"
#include "routesig/transport.hpp"

namespace routesig {

/// Score gaps below this are reported as ties.
inline constexpr double kTieEpsilon = 1e-12;

/// Weights of the two distances in the aggregate score. The default is the plain average.
struct ScoreWeights {
    double spec = 0.5;
    double collab = 0.5;
};

/// Higher score means stronger evidence the candidate was distilled from the teacher.
struct DetectionScore {
    std::string candidate_id;
    double score = 0.0;
    double d_spec = 0.0;
    std::optional<double> d_collab;
};

/// s = -(w_spec d_spec + w_collab d_collab), or -d_spec when d_collab is absent.
DetectionScore make_score(std::string candidate_id, double d_spec, std::optional<double> d_collab,
                          const ScoreWeights& weights = {});

DetectionScore score_candidate(const SignatureBundle& teacher, const SignatureBundle& student,
                               const MatchOptions& options = {}, const ScoreWeights& weights = {});

struct PairVerdict {
    /// 1 or 2.
    int predicted = 1;
    /// score(chosen) - score(other), never negative.
    double margin = 0.0;
    /// Scores closer than kTieEpsilon; candidate 1 is then chosen.
    bool tie = false;
    std::array<DetectionScore, 2> scores;
};

PairVerdict decide_pair(DetectionScore first, DetectionScore second);

/// Throws ShapeError when exactly one candidate's score lacks a collaboration term.
PairVerdict detect_pair(const SignatureBundle& teacher, const SignatureBundle& candidate1,
                        const SignatureBundle& candidate2, const MatchOptions& options = {},
                        const ScoreWeights& weights = {});

struct BenchmarkPair {
    std::string label;
    RoutingTraceSet distilled;
    RoutingTraceSet scratch;
};

struct BenchmarkRow {
    std::string label;
    /// Candidate 1 is the distilled model, candidate 2 the scratch model.
    PairVerdict verdict;
    /// Signed margin s(distilled) - s(scratch).
    double margin = 0.0;
    /// The distilled model was chosen without a tie.
    bool correct = false;

    const DetectionScore& distilled() const { return verdict.scores[0]; }
    const DetectionScore& scratch() const { return verdict.scores[1]; }
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    /// Fraction of rows marked correct.
    double accuracy = 0.0;
    int layer = 0;
    MatchOptions options;
};

/// Fraction of correct rows; 0 for an empty benchmark.
double pairwise_accuracy(std::span<const BenchmarkRow> rows);

BenchmarkReport run_benchmark(const RoutingTraceSet& teacher, std::span<const BenchmarkPair> pairs,
                              LayerPolicy layer_policy = LayerPolicy::last(),
                              const MatchOptions& options = {}, const ScoreWeights& weights = {});

}  // namespace routesig
