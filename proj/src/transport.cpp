#include "routesig/transport.hpp"

#include <algorithm>
#include <functional>

namespace routesig {

MatchMode parse_match_mode(std::string_view text) {
    if (text == "auto") return MatchMode::Auto;
    if (text == "exact") return MatchMode::Exact;
    if (text == "heuristic") return MatchMode::Heuristic;
    throw Error("invalid match mode '" + std::string(text) + "'");
}

std::string_view to_string(MatchMode mode) {
    switch (mode) {
        case MatchMode::Auto: return "auto";
        case MatchMode::Exact: return "exact";
        case MatchMode::Heuristic: return "heuristic";
    }
    return "?";
}

std::string_view to_string(MatchMethod method) {
    return method == MatchMethod::ExactBruteForce ? "exact-brute-force" : "hungarian-heuristic";
}

namespace {

std::vector<int> inverse_of(const std::vector<int>& mapping) {
    std::vector<int> inv(mapping.size());
    for (std::size_t i = 0; i < mapping.size(); ++i)
        inv[static_cast<std::size_t>(mapping[i])] = static_cast<int>(i);
    return inv;
}

// Spec objective for a raw mapping; the permuted teacher column at row
// mapping[i] is teacher row i, so row r of it is teacher row inv[r].
double spec_objective_raw(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                          const std::vector<int>& inv) {
    const Eigen::Index experts = teacher.rows();
    double total = 0.0;
    for (Eigen::Index d = 0; d < teacher.cols(); ++d) {
        double gap = 0.0, w1 = 0.0;
        for (Eigen::Index r = 0; r + 1 < experts; ++r) {
            gap += teacher(inv[static_cast<std::size_t>(r)], d) - student(r, d);
            w1 += std::abs(gap);
        }
        total += w1;
    }
    return total / static_cast<double>(teacher.cols());
}

double collab_objective_raw(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                            const std::vector<int>& inv) {
    const Eigen::Index experts = teacher.rows();
    thread_local Eigen::VectorXd row;
    row.resize(experts);
    double total = 0.0;
    for (Eigen::Index a = 0; a < experts; ++a) {
        const Eigen::Index src = inv[static_cast<std::size_t>(a)];
        for (Eigen::Index b = 0; b < experts; ++b) row(b) = teacher(src, inv[static_cast<std::size_t>(b)]);
        total += collab_row_distance(row, student.row(a), a);
    }
    return total / static_cast<double>(experts);
}

void check_square_pair(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student) {
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols() ||
        teacher.rows() != teacher.cols())
        throw ShapeError("collaboration matrices have incompatible shapes");
}

bool use_exact(Eigen::Index experts, const MatchOptions& options) {
    switch (options.mode) {
        case MatchMode::Heuristic: return false;
        case MatchMode::Auto: return experts <= options.exact_threshold;
        case MatchMode::Exact: break;
    }
    if (experts > options.exact_limit)
        throw Error("exact matching over " + std::to_string(experts) +
                    " experts exceeds the enumeration limit of " +
                    std::to_string(options.exact_limit));
    return true;
}

// Student columns reordered to the teacher's domain order.
Eigen::MatrixXd align_domains(const SpecializationProfile& teacher,
                              const SpecializationProfile& student) {
    if (teacher.num_experts() != student.num_experts())
        throw ShapeError("specialization profiles differ in expert count (" +
                         std::to_string(teacher.num_experts()) + " vs " +
                         std::to_string(student.num_experts()) + ")");
    if (teacher.domains.size() != student.domains.size())
        throw ShapeError("specialization profiles cover different domain sets");
    Eigen::MatrixXd aligned(student.share.rows(), student.share.cols());
    for (std::size_t d = 0; d < teacher.domains.size(); ++d) {
        auto it = std::find(student.domains.begin(), student.domains.end(), teacher.domains[d]);
        if (it == student.domains.end())
            throw ShapeError("domain '" + teacher.domains[d] + "' missing from student profile");
        aligned.col(static_cast<Eigen::Index>(d)) =
            student.share.col(static_cast<Eigen::Index>(it - student.domains.begin()));
    }
    return aligned;
}

}  // namespace

double spec_objective(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                      const Permutation& relabel) {
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols())
        throw ShapeError("specialization matrices have incompatible shapes");
    if (relabel.size() != teacher.rows()) throw ShapeError("permutation size mismatch");
    return spec_objective_raw(teacher, student, inverse_of(permutation_mapping(relabel)));
}

double collab_objective(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student,
                        const Permutation& relabel) {
    check_square_pair(teacher, student);
    if (relabel.size() != teacher.rows()) throw ShapeError("permutation size mismatch");
    return collab_objective_raw(teacher, student, inverse_of(permutation_mapping(relabel)));
}

Eigen::MatrixXd spec_cost_matrix(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student) {
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols())
        throw ShapeError("specialization matrices have incompatible shapes");
    const Eigen::Index n = teacher.rows();
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            cost(i, j) = (teacher.row(i) - student.row(j)).cwiseAbs().mean();
    return cost;
}

Eigen::MatrixXd collab_cost_matrix(const Eigen::MatrixXd& teacher, const Eigen::MatrixXd& student) {
    check_square_pair(teacher, student);
    const Eigen::Index n = teacher.rows();
    // Each row reduced to its nonzero entries sorted descending, zero padded.
    auto sorted_rows = [n](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<double> nz;
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i && m(i, j) > 0.0) nz.push_back(m(i, j));
            std::sort(nz.begin(), nz.end(), std::greater<>());
            for (std::size_t k = 0; k < nz.size(); ++k) out(i, static_cast<Eigen::Index>(k)) = nz[k];
        }
        return out;
    };
    const Eigen::MatrixXd t = sorted_rows(teacher), s = sorted_rows(student);
    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (t.row(i) - s.row(j)).cwiseAbs().sum();
    return cost;
}

MatchResult spec_distance(const SpecializationProfile& teacher, const SpecializationProfile& student,
                          const MatchOptions& options) {
    const Eigen::MatrixXd aligned = align_domains(teacher, student);
    const Eigen::MatrixXd& t = teacher.share;
    if (use_exact(t.rows(), options)) {
        auto best = exact_permutation_search(
            static_cast<int>(t.rows()),
            [&](const std::vector<int>& mapping) {
                return spec_objective_raw(t, aligned, inverse_of(mapping));
            },
            options.threads);
        return {best.value, make_permutation(best.mapping), MatchMethod::ExactBruteForce};
    }
    auto assignment = hungarian(spec_cost_matrix(t, aligned));
    const double value = spec_objective(t, aligned, assignment.permutation);
    return {value, std::move(assignment.permutation), MatchMethod::HungarianHeuristic};
}

std::optional<MatchResult> collab_distance(const CollaborationMatrix& teacher,
                                           const CollaborationMatrix& student,
                                           const MatchOptions& options) {
    check_square_pair(teacher.share, student.share);
    if (teacher.has_mass() != student.has_mass())
        throw ShapeError("one collaboration matrix has no co-activation mass and the other does");
    if (!teacher.has_mass()) return std::nullopt;
    const Eigen::MatrixXd& t = teacher.share;
    const Eigen::MatrixXd& s = student.share;
    if (use_exact(t.rows(), options)) {
        auto best = exact_permutation_search(
            static_cast<int>(t.rows()),
            [&](const std::vector<int>& mapping) {
                return collab_objective_raw(t, s, inverse_of(mapping));
            },
            options.threads);
        return MatchResult{best.value, make_permutation(best.mapping), MatchMethod::ExactBruteForce};
    }
    auto assignment = hungarian(collab_cost_matrix(t, s));
    const double value = collab_objective(t, s, assignment.permutation);
    return MatchResult{value, std::move(assignment.permutation), MatchMethod::HungarianHeuristic};
}

SignatureDistance signature_distance(const SignatureBundle& teacher, const SignatureBundle& student,
                                     const MatchOptions& options) {
    auto spec = spec_distance(teacher.specialization, student.specialization, options);
    auto collab = collab_distance(teacher.collaboration, student.collaboration, options);
    SignatureDistance out;
    out.d_spec = spec.distance;
    out.spec_permutation = std::move(spec.permutation);
    out.method = spec.method;
    if (collab) {
        out.d_collab = collab->distance;
        out.collab_permutation = std::move(collab->permutation);
    }
    return out;
}

}  // namespace routesig
