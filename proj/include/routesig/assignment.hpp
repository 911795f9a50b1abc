#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "routesig/provenance.hpp"

namespace routesig {

/// Expert relabeling. Row i of a permuted matrix `P * M` is moved to row
/// `P.indices()(i)`, so `P.indices()(i)` is the partner of expert i.
using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

/// Builds a Permutation, checking that `mapping` is a bijection on [0, n).
inline Permutation make_permutation(const std::vector<int>& mapping) {
    const auto n = static_cast<int>(mapping.size());
    std::vector<char> seen(mapping.size(), 0);
    for (int v : mapping) {
        if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)])
            throw Error("mapping is not a permutation of [0, " + std::to_string(n) + ")");
        seen[static_cast<std::size_t>(v)] = 1;
    }
    Permutation p(n);
    for (int i = 0; i < n; ++i) p.indices()(i) = mapping[static_cast<std::size_t>(i)];
    return p;
}

inline std::vector<int> permutation_mapping(const Permutation& p) {
    return {p.indices().data(), p.indices().data() + p.indices().size()};
}

template <typename Scalar>
struct Assignment {
    Permutation permutation;
    Scalar total_cost;
};

/// Minimum-cost perfect assignment of rows to columns (Hungarian method with
/// row/column potentials and shortest augmenting paths, O(n^3)).
///
/// The returned permutation maps row i to column `permutation.indices()(i)`.
/// `total_cost` is summed in row order.
template <typename Derived>
Assignment<typename Derived::Scalar> hungarian(const Eigen::MatrixBase<Derived>& cost) {
    using Scalar = typename Derived::Scalar;
    static_assert(!Eigen::NumTraits<Scalar>::IsInteger || std::numeric_limits<Scalar>::is_signed);
    if (cost.rows() != cost.cols())
        throw Error("hungarian: cost matrix is " + std::to_string(cost.rows()) + "x" +
                    std::to_string(cost.cols()) + ", not square");
    for (Eigen::Index i = 0; i < cost.rows(); ++i)
        for (Eigen::Index j = 0; j < cost.cols(); ++j)
            if (!std::isfinite(static_cast<double>(cost(i, j))))
                throw Error("hungarian: non-finite cost entry");

    const auto n = static_cast<std::size_t>(cost.rows());
    const Scalar inf = std::numeric_limits<Scalar>::has_infinity
                           ? std::numeric_limits<Scalar>::infinity()
                           : std::numeric_limits<Scalar>::max();
    // 1-based; index 0 is the virtual source column.
    std::vector<Scalar> row_pot(n + 1, Scalar(0)), col_pot(n + 1, Scalar(0));
    std::vector<std::size_t> col_owner(n + 1, 0), way(n + 1, 0);
    for (std::size_t r = 1; r <= n; ++r) {
        col_owner[0] = r;
        std::size_t col = 0;
        std::vector<Scalar> min_slack(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[col] = 1;
            const std::size_t row = col_owner[col];
            Scalar delta = inf;
            std::size_t next = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const Scalar slack = cost(static_cast<Eigen::Index>(row - 1),
                                          static_cast<Eigen::Index>(j - 1)) -
                                     row_pot[row] - col_pot[j];
                if (slack < min_slack[j]) {
                    min_slack[j] = slack;
                    way[j] = col;
                }
                if (min_slack[j] < delta) {
                    delta = min_slack[j];
                    next = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    row_pot[col_owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col = next;
        } while (col_owner[col] != 0);
        do {
            const std::size_t prev = way[col];
            col_owner[col] = col_owner[prev];
            col = prev;
        } while (col != 0);
    }

    Permutation perm(static_cast<int>(n));
    for (std::size_t j = 1; j <= n; ++j)
        perm.indices()(static_cast<Eigen::Index>(col_owner[j] - 1)) = static_cast<int>(j - 1);
    Scalar total(0);
    for (Eigen::Index i = 0; i < cost.rows(); ++i) total += cost(i, perm.indices()(i));
    return {std::move(perm), total};
}

template <typename Scalar>
struct SearchResult {
    std::vector<int> mapping;
    Scalar value;
};

/// Exhaustive minimization of `objective(mapping)` over all n! permutations.
///
/// Among equal minima the lexicographically smallest mapping wins. Work is split
/// by the first element across `threads` workers; the merge runs in first-element
/// order, so the result does not depend on the thread count.
template <typename Objective>
auto exact_permutation_search(int n, Objective&& objective, unsigned threads = 1)
    -> SearchResult<decltype(objective(std::declval<const std::vector<int>&>()))> {
    using Scalar = decltype(objective(std::declval<const std::vector<int>&>()));
    if (n < 1) throw Error("exact_permutation_search: empty permutation");

    auto search_prefix = [&](int first) {
        std::vector<int> mapping(static_cast<std::size_t>(n));
        mapping[0] = first;
        for (int v = 0, pos = 1; v < n; ++v)
            if (v != first) mapping[static_cast<std::size_t>(pos++)] = v;
        SearchResult<Scalar> best{mapping, objective(mapping)};
        while (std::next_permutation(mapping.begin() + 1, mapping.end())) {
            const Scalar value = objective(mapping);
            if (value < best.value) best = {mapping, value};
        }
        return best;
    };

    std::vector<SearchResult<Scalar>> partial(static_cast<std::size_t>(n));
    threads = std::clamp(threads, 1u, static_cast<unsigned>(n));
    if (threads == 1) {
        for (int f = 0; f < n; ++f) partial[static_cast<std::size_t>(f)] = search_prefix(f);
    } else {
        std::vector<std::future<void>> workers;
        for (unsigned t = 0; t < threads; ++t) {
            workers.push_back(std::async(std::launch::async, [&, t] {
                for (int f = static_cast<int>(t); f < n; f += static_cast<int>(threads))
                    partial[static_cast<std::size_t>(f)] = search_prefix(f);
            }));
        }
        for (auto& w : workers) w.get();
    }

    SearchResult<Scalar> best = std::move(partial[0]);
    for (std::size_t f = 1; f < partial.size(); ++f)
        if (partial[f].value < best.value) best = std::move(partial[f]);
    return best;
}

}  // namespace routesig
