#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "routesig/routing_trace.hpp"

namespace routesig {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-domain expert selection frequencies, each domain column normalized by the
/// mean active-expert count of that domain so that it sums to one.
///
/// Counts are kept as integers; `share` is produced with a single division per
/// entry, so the result does not depend on accumulation order.
struct SpecializationProfile {
    int layer = 0;
    /// Domains that had at least one query; the column axis of every matrix below.
    std::vector<std::string> domains;
    /// Normalized profile, E x D.
    Eigen::MatrixXd share;
    /// Mean active-expert count per domain.
    Eigen::VectorXd kappa;
    /// Queries per domain.
    std::vector<std::int64_t> counts;
    /// Number of domain-d queries that selected expert i, E x D.
    CountMatrix selections;
    /// Sum of k over the domain-d queries.
    std::vector<std::int64_t> total_k;

    Eigen::Index num_experts() const noexcept { return share.rows(); }
    Eigen::Index num_domains() const noexcept { return share.cols(); }
    /// Unnormalized selection frequency (selections / n_d).
    Eigen::MatrixXd selection_frequency() const;
};

/// Normalized co-activation frequencies between distinct experts.
struct CollaborationMatrix {
    int layer = 0;
    /// E x E, symmetric, zero diagonal; off-diagonal mass 1 when has_mass().
    Eigen::MatrixXd share;
    /// Number of queries in which experts i and j were both active (i != j).
    CountMatrix coactivations;
    /// Sum over queries of k (k - 1).
    std::int64_t pair_total = 0;
    std::int64_t num_queries = 0;

    Eigen::Index num_experts() const noexcept { return share.rows(); }
    /// Mean of k (k - 1) over queries.
    double pair_normalizer() const noexcept {
        return num_queries ? static_cast<double>(pair_total) / static_cast<double>(num_queries) : 0.0;
    }
    /// False when every query selected a single expert; the matrix is then all zero.
    bool has_mass() const noexcept { return pair_total > 0; }
};

struct SignatureBundle {
    std::string model_id;
    SpecializationProfile specialization;
    CollaborationMatrix collaboration;
};

struct SpecializationOptions {
    /// Error on a domain with no queries instead of dropping it from the axis.
    bool require_all_domains = false;
};

SpecializationProfile compute_specialization(const RoutingTraceSet& traces, int layer,
                                             const SpecializationOptions& options = {});
CollaborationMatrix compute_collaboration(const RoutingTraceSet& traces, int layer);

struct LayerPolicy {
    enum class Kind { First, Median, Last, Explicit };
    Kind kind = Kind::Last;
    int index = 0;

    static LayerPolicy first() { return {Kind::First, 0}; }
    static LayerPolicy median() { return {Kind::Median, 0}; }
    static LayerPolicy last() { return {Kind::Last, 0}; }
    static LayerPolicy at(int index) { return {Kind::Explicit, index}; }
    /// "first", "median", "last" or a non-negative integer.
    static LayerPolicy parse(std::string_view text);
    std::string to_string() const;

    /// Throws Error when an explicit index is outside [0, num_layers).
    int resolve(int num_layers) const;
};

SignatureBundle signature_bundle(const RoutingTraceSet& traces, LayerPolicy policy = LayerPolicy::last());

}  // namespace routesig
