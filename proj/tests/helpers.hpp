#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "routesig/rng.hpp"
#include "routesig/routing_trace.hpp"
#include "routesig/signatures.hpp"

namespace routesig::testing {

struct Query {
    int domain;
    std::vector<int> selected;
};

inline RoutingTraceSet single_layer(int experts, std::vector<std::string> domains, const std::vector<Query>& queries,
                                    std::string model_id = "m") {
    RoutingTraceSet set;
    set.model_id = std::move(model_id);
    set.experts_per_layer = {experts};
    set.domains = std::move(domains);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        QueryTrace t;
        t.query_id = "q" + std::to_string(q);
        t.domain = queries[q].domain;
        t.selections.push_back({0, queries[q].selected, {}});
        set.traces.push_back(std::move(t));
    }
    return set;
}

/// k distinct experts drawn uniformly from [0, experts).
inline std::vector<int> random_subset(Rng& rng, int experts, int k) {
    std::vector<int> all(static_cast<std::size_t>(experts));
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(std::span<int>(all));
    all.resize(static_cast<std::size_t>(k));
    return all;
}

/// Random trace set with per-query k in [1, min(E, kmax)] and every domain nonempty.
inline RoutingTraceSet random_traces(Rng& rng, int layers, int experts, int domains, int n, int kmax = 4) {
    RoutingTraceSet set;
    set.model_id = "random";
    set.experts_per_layer.assign(static_cast<std::size_t>(layers), experts);
    for (int d = 0; d < domains; ++d) set.domains.push_back("d" + std::to_string(d + 1));
    n = std::max(n, domains);
    for (int q = 0; q < n; ++q) {
        QueryTrace t;
        t.query_id = "q" + std::to_string(q);
        t.domain = q < domains ? q : static_cast<int>(rng.below(static_cast<std::uint64_t>(domains)));
        for (int l = 0; l < layers; ++l) {
            const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(experts, kmax))));
            t.selections.push_back({l, random_subset(rng, experts, k), {}});
        }
        set.traces.push_back(std::move(t));
    }
    return set;
}

inline Eigen::MatrixXd random_stochastic_columns(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    for (int c = 0; c < cols; ++c) {
        if (m.col(c).sum() == 0.0) m(0, c) = 1.0;
        m.col(c) /= m.col(c).sum();
    }
    return m;
}

/// Symmetric, zero diagonal, total mass one.
inline Eigen::MatrixXd random_collaboration(Rng& rng, int experts) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(experts, experts);
    for (int i = 0; i < experts; ++i)
        for (int j = i + 1; j < experts; ++j) m(i, j) = m(j, i) = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    if (m.sum() == 0.0) m(0, 1) = m(1, 0) = 1.0;
    return m / m.sum();
}

inline std::vector<int> random_mapping(Rng& rng, int n) {
    std::vector<int> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    rng.shuffle(std::span<int>(m));
    return m;
}

/// Every permutation of 0..n-1, in lexicographic order.
inline std::vector<std::vector<int>> all_mappings(int n) {
    std::vector<int> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    std::vector<std::vector<int>> out;
    do out.push_back(m);
    while (std::next_permutation(m.begin(), m.end()));
    return out;
}

/// Brute-force 1-D W1 through the CDF definition, written without Eigen.
inline double w1_oracle(const std::vector<double>& p, const std::vector<double>& q) {
    double cp = 0, cq = 0, total = 0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        cp += p[i];
        cq += q[i];
        total += std::abs(cp - cq);
    }
    return total;
}

/// Naive counting oracle for both signatures at one layer. Shares are formed
/// from the raw tallies with a single division.
struct NaiveSignature {
    std::vector<std::vector<long long>> selections;  // [expert][domain]
    std::vector<long long> total_k;                   // [domain]
    std::vector<long long> n;                         // [domain]
    std::vector<std::vector<long long>> coact;        // [i][j]
    long long pairs = 0;
};

inline NaiveSignature naive_signature(const RoutingTraceSet& set, int layer) {
    const int e = set.experts_per_layer[static_cast<std::size_t>(layer)];
    const int d = set.num_domains();
    NaiveSignature s;
    s.selections.assign(static_cast<std::size_t>(e), std::vector<long long>(static_cast<std::size_t>(d), 0));
    s.total_k.assign(static_cast<std::size_t>(d), 0);
    s.n.assign(static_cast<std::size_t>(d), 0);
    s.coact.assign(static_cast<std::size_t>(e), std::vector<long long>(static_cast<std::size_t>(e), 0));
    for (const auto& t : set.traces) {
        for (const auto& sel : t.selections) {
            if (sel.layer != layer) continue;
            const auto dd = static_cast<std::size_t>(t.domain);
            s.n[dd] += 1;
            for (int i = 0; i < e; ++i) {
                bool on_i = false;
                for (int x : sel.selected) on_i = on_i || x == i;
                if (!on_i) continue;
                s.selections[static_cast<std::size_t>(i)][dd] += 1;
                s.total_k[dd] += 1;
                for (int j = 0; j < e; ++j) {
                    if (j == i) continue;
                    for (int x : sel.selected)
                        if (x == j) {
                            s.coact[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += 1;
                            s.pairs += 1;
                        }
                }
            }
        }
    }
    return s;
}

}  // namespace routesig::testing
