#include "routesig/detector.hpp"

#include <cmath>

namespace routesig {

DetectionScore make_score(std::string candidate_id, double d_spec, std::optional<double> d_collab,
                          const ScoreWeights& weights) {
    DetectionScore s;
    s.candidate_id = std::move(candidate_id);
    s.d_spec = d_spec;
    s.d_collab = d_collab;
    s.score = 0.0 - (d_collab ? weights.spec * d_spec + weights.collab * *d_collab : d_spec);
    return s;
}

DetectionScore score_candidate(const SignatureBundle& teacher, const SignatureBundle& student,
                               const MatchOptions& options, const ScoreWeights& weights) {
    const SignatureDistance d = signature_distance(teacher, student, options);
    return make_score(student.model_id, d.d_spec, d.d_collab, weights);
}

PairVerdict decide_pair(DetectionScore first, DetectionScore second) {
    if (first.d_collab.has_value() != second.d_collab.has_value())
        throw ShapeError("candidates disagree on whether a collaboration distance exists");
    PairVerdict v;
    const double gap = first.score - second.score;
    v.tie = std::abs(gap) < kTieEpsilon;
    v.predicted = (v.tie || gap > 0.0) ? 1 : 2;
    v.margin = std::abs(gap);
    v.scores = {std::move(first), std::move(second)};
    return v;
}

PairVerdict detect_pair(const SignatureBundle& teacher, const SignatureBundle& candidate1,
                        const SignatureBundle& candidate2, const MatchOptions& options,
                        const ScoreWeights& weights) {
    return decide_pair(score_candidate(teacher, candidate1, options, weights),
                       score_candidate(teacher, candidate2, options, weights));
}

double pairwise_accuracy(std::span<const BenchmarkRow> rows) {
    if (rows.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& r : rows) correct += r.correct ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

BenchmarkReport run_benchmark(const RoutingTraceSet& teacher, std::span<const BenchmarkPair> pairs,
                              LayerPolicy layer_policy, const MatchOptions& options,
                              const ScoreWeights& weights) {
    BenchmarkReport report;
    report.options = options;
    report.layer = layer_policy.resolve(teacher.num_layers());
    const SignatureBundle teacher_sig = signature_bundle(teacher, layer_policy);
    for (const auto& pair : pairs) {
        if (pair.distilled.traces.empty() || pair.scratch.traces.empty())
            throw Error("benchmark pair '" + pair.label + "' is missing a member");
        if (pair.distilled.num_layers() != teacher.num_layers() ||
            pair.scratch.num_layers() != teacher.num_layers())
            throw ShapeError("benchmark pair '" + pair.label + "' differs from the teacher in depth");
        BenchmarkRow row;
        row.label = pair.label;
        row.verdict = detect_pair(teacher_sig, signature_bundle(pair.distilled, layer_policy),
                                  signature_bundle(pair.scratch, layer_policy), options, weights);
        row.margin = row.verdict.scores[0].score - row.verdict.scores[1].score;
        row.correct = !row.verdict.tie && row.verdict.predicted == 1;
        report.rows.push_back(std::move(row));
    }
    report.accuracy = pairwise_accuracy(report.rows);
    return report;
}

}  // namespace routesig
