#include <doctest.h>

#include <limits>

#include "helpers.hpp"
#include "routesig/transport.hpp"

using namespace routesig;

namespace {

SpecializationProfile profile_of(Eigen::MatrixXd share) {
    SpecializationProfile p;
    for (Eigen::Index d = 0; d < share.cols(); ++d) p.domains.push_back("d" + std::to_string(d));
    p.share = std::move(share);
    return p;
}

CollaborationMatrix collab_of(Eigen::MatrixXd share) {
    CollaborationMatrix c;
    c.pair_total = share.isZero(0) ? 0 : 1;
    c.num_queries = 1;
    c.share = std::move(share);
    return c;
}

// Direct evaluation on explicitly permuted matrices.
double spec_oracle(const Eigen::MatrixXd& t, const Eigen::MatrixXd& s, const Permutation& p) {
    const Eigen::MatrixXd pt = p * t;
    double total = 0;
    for (Eigen::Index d = 0; d < t.cols(); ++d) {
        std::vector<double> a(pt.col(d).data(), pt.col(d).data() + t.rows());
        std::vector<double> b(s.col(d).data(), s.col(d).data() + t.rows());
        total += testing::w1_oracle(a, b);
    }
    return total / static_cast<double>(t.cols());
}

double collab_oracle(const Eigen::MatrixXd& t, const Eigen::MatrixXd& s, const Permutation& p) {
    const Eigen::MatrixXd pt = p * t * p.transpose();
    const Eigen::Index n = t.rows();
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> a, b;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || (pt(i, j) == 0.0 && s(i, j) == 0.0)) continue;
            a.push_back(pt(i, j));
            b.push_back(s(i, j));
        }
        if (a.empty()) continue;
        double sa = 0, sb = 0;
        for (std::size_t k = 0; k < a.size(); ++k) sa += a[k], sb += b[k];
        for (std::size_t k = 0; k < a.size(); ++k) {
            a[k] = sa < 1e-12 ? 1.0 / static_cast<double>(a.size()) : a[k] / sa;
            b[k] = sb < 1e-12 ? 1.0 / static_cast<double>(b.size()) : b[k] / sb;
        }
        total += testing::w1_oracle(a, b);
    }
    return total / static_cast<double>(n);
}

template <typename F>
double brute_force(int n, F&& value) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : testing::all_mappings(n)) best = std::min(best, value(make_permutation(m)));
    return best;
}

const MatchOptions kExact{.mode = MatchMode::Exact};
const MatchOptions kHeuristic{.mode = MatchMode::Heuristic};

}  // namespace

TEST_CASE("a signature is at distance zero from itself") {
    Rng rng(1);
    const auto t = testing::random_stochastic_columns(rng, 5, 3);
    const auto r = spec_distance(profile_of(t), profile_of(t), kExact);
    CHECK(r.distance == 0.0);
    CHECK(permutation_mapping(r.permutation) == std::vector<int>{0, 1, 2, 3, 4});
    const auto b = testing::random_collaboration(rng, 5);
    CHECK(collab_distance(collab_of(b), collab_of(b), kExact)->distance == 0.0);
}

TEST_CASE("relabeled copies are recovered exactly") {
    Rng rng(2);
    for (int round = 0; round < 20; ++round) {
        const int e = 2 + static_cast<int>(rng.below(5));
        const auto t = testing::random_stochastic_columns(rng, e, 3);
        const auto b = testing::random_collaboration(rng, e);
        const Permutation p = make_permutation(testing::random_mapping(rng, e));
        const auto spec = spec_distance(profile_of(t), profile_of(p * t), kExact);
        CHECK(spec.distance < 1e-12);
        CHECK(spec_oracle(t, p * t, spec.permutation) < 1e-12);
        const Eigen::MatrixXd pb = p * b * p.transpose();
        const auto collab = collab_distance(collab_of(b), collab_of(pb), kExact);
        CHECK(collab->distance < 1e-12);
        CHECK(collab_oracle(b, pb, collab->permutation) < 1e-12);
    }
}

TEST_CASE("the recovered relabeling is the planted one when it is unique") {
    Eigen::MatrixXd t(4, 1);
    t << 0.1, 0.2, 0.3, 0.4;
    const Permutation p = make_permutation({2, 0, 3, 1});
    const auto r = spec_distance(profile_of(t), profile_of(p * t), kExact);
    CHECK(permutation_mapping(r.permutation) == std::vector<int>{2, 0, 3, 1});
}

TEST_CASE("exact distances equal brute force over explicit permutations") {
    Rng rng(3);
    for (int round = 0; round < 30; ++round) {
        const auto t = testing::random_stochastic_columns(rng, 4, 2);
        const auto s = testing::random_stochastic_columns(rng, 4, 2);
        const double spec = spec_distance(profile_of(t), profile_of(s), kExact).distance;
        CHECK(spec == doctest::Approx(brute_force(4, [&](const Permutation& p) { return spec_oracle(t, s, p); }))
                          .epsilon(1e-12));
        const auto bt = testing::random_collaboration(rng, 4);
        const auto bs = testing::random_collaboration(rng, 4);
        const double collab = collab_distance(collab_of(bt), collab_of(bs), kExact)->distance;
        CHECK(collab ==
              doctest::Approx(brute_force(4, [&](const Permutation& p) { return collab_oracle(bt, bs, p); }))
                  .epsilon(1e-12));
    }
}

TEST_CASE("objectives agree with the explicit-permutation oracles") {
    Rng rng(4);
    for (int round = 0; round < 50; ++round) {
        const int e = 2 + static_cast<int>(rng.below(7));
        const auto t = testing::random_stochastic_columns(rng, e, 3);
        const auto s = testing::random_stochastic_columns(rng, e, 3);
        const auto bt = testing::random_collaboration(rng, e);
        const auto bs = testing::random_collaboration(rng, e);
        const Permutation p = make_permutation(testing::random_mapping(rng, e));
        CHECK(spec_objective(t, s, p) == doctest::Approx(spec_oracle(t, s, p)).epsilon(1e-12));
        CHECK(collab_objective(bt, bs, p) == doctest::Approx(collab_oracle(bt, bs, p)).epsilon(1e-12));
    }
}

TEST_CASE("collaboration rows compare over their joint support") {
    // Teacher row 0 puts mass on column 1, student row 0 on column 2: support {1, 2}, distance 1.
    Eigen::Vector3d t(0, 1, 0), s(0, 0, 1);
    CHECK(collab_row_distance(t, s, 0) == 1.0);
    CHECK(collab_row_distance(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 0) == 0.0);
    // Mass on the self column is ignored.
    CHECK(collab_row_distance(Eigen::Vector3d(5, 1, 0), Eigen::Vector3d(0, 1, 0), 0) == 0.0);
}

TEST_CASE("heuristic costs") {
    Eigen::MatrixXd t(2, 1), s(2, 1);
    t << 1, 0;
    s << 0, 1;
    Eigen::Matrix2d expected;
    expected << 1, 0, 0, 1;
    CHECK(spec_cost_matrix(t, s) == expected);
    CHECK(spec_cost_matrix(t, t).diagonal().isZero(0));

    Rng rng(6);
    const auto b = testing::random_collaboration(rng, 6);
    CHECK(collab_cost_matrix(b, b).diagonal().isZero(0));
    const Permutation p = make_permutation(testing::random_mapping(rng, 6));
    const auto ts = testing::random_stochastic_columns(rng, 6, 3);
    const auto r = spec_distance(profile_of(ts), profile_of(p * ts), kHeuristic);
    CHECK(r.method == MatchMethod::HungarianHeuristic);
    CHECK(r.distance < 1e-12);
}

TEST_CASE("heuristic never beats exact") {
    Rng rng(7);
    for (int round = 0; round < 40; ++round) {
        const int e = 2 + static_cast<int>(rng.below(6));
        const auto t = profile_of(testing::random_stochastic_columns(rng, e, 2));
        const auto s = profile_of(testing::random_stochastic_columns(rng, e, 2));
        CHECK(spec_distance(t, s, kHeuristic).distance >= spec_distance(t, s, kExact).distance - 1e-15);
        const auto bt = collab_of(testing::random_collaboration(rng, e));
        const auto bs = collab_of(testing::random_collaboration(rng, e));
        CHECK(collab_distance(bt, bs, kHeuristic)->distance >= collab_distance(bt, bs, kExact)->distance - 1e-15);
    }
}

TEST_CASE("mode selection and limits") {
    Rng rng(8);
    const auto small = profile_of(testing::random_stochastic_columns(rng, 8, 1));
    const auto big = profile_of(testing::random_stochastic_columns(rng, 11, 1));
    CHECK(spec_distance(small, small).method == MatchMethod::ExactBruteForce);
    CHECK(spec_distance(big, big).method == MatchMethod::HungarianHeuristic);
    CHECK_THROWS_AS(spec_distance(big, big, kExact), Error);
    CHECK(parse_match_mode("heuristic") == MatchMode::Heuristic);
    CHECK_THROWS_AS(parse_match_mode("fast"), Error);
}

TEST_CASE("thread count does not change the answer") {
    Rng rng(9);
    const auto t = profile_of(testing::random_stochastic_columns(rng, 7, 3));
    const auto s = profile_of(testing::random_stochastic_columns(rng, 7, 3));
    const auto one = spec_distance(t, s, kExact);
    const auto four = spec_distance(t, s, {.mode = MatchMode::Exact, .threads = 4});
    CHECK(one.distance == four.distance);
    CHECK(permutation_mapping(one.permutation) == permutation_mapping(four.permutation));
}

TEST_CASE("shape and mass mismatches") {
    Rng rng(10);
    const auto a = profile_of(testing::random_stochastic_columns(rng, 4, 2));
    const auto b = profile_of(testing::random_stochastic_columns(rng, 5, 2));
    CHECK_THROWS_AS(spec_distance(a, b), ShapeError);
    auto renamed = a;
    renamed.domains[1] = "other";
    CHECK_THROWS_AS(spec_distance(a, renamed), ShapeError);
    const auto empty = collab_of(Eigen::MatrixXd::Zero(4, 4));
    const auto full = collab_of(testing::random_collaboration(rng, 4));
    CHECK_FALSE(collab_distance(empty, empty).has_value());
    CHECK_THROWS_AS(collab_distance(empty, full), ShapeError);
}

TEST_CASE("student domain order is matched by label") {
    Rng rng(11);
    const auto t = testing::random_stochastic_columns(rng, 4, 2);
    auto teacher = profile_of(t);
    SpecializationProfile student;
    student.domains = {"d1", "d0"};
    student.share.resize(4, 2);
    student.share.col(0) = t.col(1);
    student.share.col(1) = t.col(0);
    CHECK(spec_distance(teacher, student, kExact).distance == 0.0);
}
