#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "routesig/assignment.hpp"
#include "routesig/signatures.hpp"
#include "routesig/wasserstein.hpp"

namespace routesig {

enum class MatchMode { Auto, Exact, Heuristic };
enum class MatchMethod { HungarianHeuristic, ExactBruteForce };

MatchMode parse_match_mode(std::string_view text);
std::string_view to_string(MatchMode mode);
std::string_view to_string(MatchMethod method);

struct MatchOptions {
    MatchMode mode = MatchMode::Auto;
    /// Auto mode enumerates all permutations up to this many experts.
    int exact_threshold = 8;
    /// Exact mode refuses larger problems.
    int exact_limit = 10;
    /// Worker cap for the exhaustive search; results do not depend on it.
    unsigned threads = 1;
};

struct MatchResult {
    double distance = 0.0;
    Permutation permutation;
    MatchMethod method = MatchMethod::ExactBruteForce;
};

/// Permutation-invariant distances between two models' signatures at one layer.
struct SignatureDistance {
    double d_spec = 0.0;
    /// Absent when neither collaboration matrix carries co-activation mass.
    std::optional<double> d_collab;
    Permutation spec_permutation;
    std::optional<Permutation> collab_permutation;
    MatchMethod method = MatchMethod::ExactBruteForce;
};

/// (1/D) sum_d W1((P S_T)[:, d], S_S[:, d]) for a fixed relabeling P, on
/// positions 0..E-1. Both matrices must share shape and column order.
double spec_objective(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                      const Permutation& relabel);

/// W1 between one teacher row and one student row of a collaboration matrix:
/// both are restricted to the columns (other than `self`) that are nonzero in
/// either row, renormalized, and compared on positions 0..|support|-1. Rows
/// with an empty support contribute 0.
template <typename DerivedT, typename DerivedS>
double collab_row_distance(const Eigen::MatrixBase<DerivedT>& teacher_row,
                           const Eigen::MatrixBase<DerivedS>& student_row, Eigen::Index self);

/// (1/E) sum_i W1((P B_T P^T)[i, :], B_S[i, :]) using collab_row_distance.
double collab_objective(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                        const Permutation& relabel);

/// Assignment costs used by the Hungarian heuristic. cost(i, j) prices moving
/// teacher expert i onto student expert j.
Eigen::MatrixXd spec_cost_matrix(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student);
Eigen::MatrixXd collab_cost_matrix(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student);

MatchResult spec_distance(const SpecializationProfile& teacher, const SpecializationProfile& student,
                          const MatchOptions& options = {});

/// std::nullopt when both matrices lack co-activation mass; ShapeError when only one does.
std::optional<MatchResult> collab_distance(const CollaborationMatrix& teacher,
                                           const CollaborationMatrix& student,
                                           const MatchOptions& options = {});

SignatureDistance signature_distance(const SignatureBundle& teacher, const SignatureBundle& student,
                                     const MatchOptions& options = {});

// ---------------------------------------------------------------------------

template <typename DerivedT, typename DerivedS>
double collab_row_distance(const Eigen::MatrixBase<DerivedT>& teacher_row,
                           const Eigen::MatrixBase<DerivedS>& student_row, Eigen::Index self) {
    const Eigen::Index n = teacher_row.size();
    thread_local Eigen::VectorXd p, q;
    p.resize(n);
    q.resize(n);
    Eigen::Index support = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == self) continue;
        const double t = teacher_row(j), s = student_row(j);
        if (t > 0.0 || s > 0.0) {
            p(support) = t;
            q(support) = s;
            ++support;
        }
    }
    if (support == 0) return 0.0;
    auto normalize = [support](auto v) {
        const double mass = v.sum();
        if (mass < 1e-12)
            v.setConstant(1.0 / static_cast<double>(support));
        else
            v /= mass;
    };
    normalize(p.head(support));
    normalize(q.head(support));
    return detail::wasserstein1_unit(p.head(support), q.head(support));
}

}  // namespace routesig
