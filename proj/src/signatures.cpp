#include "routesig/signatures.hpp"

#include <charconv>

namespace routesig {

namespace {

const ExpertSelection& require_layer(const QueryTrace& t, int layer) {
    const ExpertSelection* s = t.selection(layer);
    if (!s)
        throw TraceError(0, "query '" + t.query_id + "' has no selection at layer " +
                                std::to_string(layer));
    return *s;
}

void check_layer(const RoutingTraceSet& traces, int layer) {
    if (layer < 0 || layer >= traces.num_layers())
        throw Error("layer " + std::to_string(layer) + " out of range [0, " +
                    std::to_string(traces.num_layers()) + ")");
}

}  // namespace

Eigen::MatrixXd SpecializationProfile::selection_frequency() const {
    Eigen::MatrixXd freq = selections.cast<double>();
    for (Eigen::Index d = 0; d < freq.cols(); ++d)
        freq.col(d) /= static_cast<double>(counts[static_cast<std::size_t>(d)]);
    return freq;
}

SpecializationProfile compute_specialization(const RoutingTraceSet& traces, int layer,
                                             const SpecializationOptions& options) {
    check_layer(traces, layer);
    const Eigen::Index num_experts = traces.experts_per_layer[static_cast<std::size_t>(layer)];
    const auto all_domains = static_cast<Eigen::Index>(traces.domains.size());

    CountMatrix selections = CountMatrix::Zero(num_experts, all_domains);
    std::vector<std::int64_t> counts(traces.domains.size(), 0);
    std::vector<std::int64_t> total_k(traces.domains.size(), 0);
    for (const auto& t : traces.traces) {
        const ExpertSelection& s = require_layer(t, layer);
        const auto d = static_cast<std::size_t>(t.domain);
        ++counts[d];
        total_k[d] += s.k();
        for (int e : s.selected) ++selections(e, t.domain);
    }

    std::vector<Eigen::Index> kept;
    for (std::size_t d = 0; d < counts.size(); ++d) {
        if (counts[d] > 0)
            kept.push_back(static_cast<Eigen::Index>(d));
        else if (options.require_all_domains)
            throw Error("domain '" + traces.domains[d] + "' has no queries");
    }
    if (kept.empty()) throw Error("no queries to profile");

    SpecializationProfile p;
    p.layer = layer;
    const auto num_kept = static_cast<Eigen::Index>(kept.size());
    p.share.resize(num_experts, num_kept);
    p.kappa.resize(num_kept);
    p.selections.resize(num_experts, num_kept);
    for (Eigen::Index c = 0; c < num_kept; ++c) {
        const auto d = static_cast<std::size_t>(kept[static_cast<std::size_t>(c)]);
        p.domains.push_back(traces.domains[d]);
        p.counts.push_back(counts[d]);
        p.total_k.push_back(total_k[d]);
        p.selections.col(c) = selections.col(kept[static_cast<std::size_t>(c)]);
        p.kappa(c) = static_cast<double>(total_k[d]) / static_cast<double>(counts[d]);
        // (count / n_d) / (sum_k / n_d) with the n_d cancelled.
        for (Eigen::Index i = 0; i < num_experts; ++i)
            p.share(i, c) = static_cast<double>(p.selections(i, c)) / static_cast<double>(total_k[d]);
    }
    return p;
}

CollaborationMatrix compute_collaboration(const RoutingTraceSet& traces, int layer) {
    check_layer(traces, layer);
    if (traces.traces.empty()) throw Error("no queries to profile");
    const Eigen::Index num_experts = traces.experts_per_layer[static_cast<std::size_t>(layer)];

    CollaborationMatrix c;
    c.layer = layer;
    c.coactivations = CountMatrix::Zero(num_experts, num_experts);
    for (const auto& t : traces.traces) {
        const ExpertSelection& s = require_layer(t, layer);
        const std::int64_t k = s.k();
        c.pair_total += k * (k - 1);
        for (int a : s.selected)
            for (int b : s.selected)
                if (a != b) ++c.coactivations(a, b);
    }
    c.num_queries = static_cast<std::int64_t>(traces.traces.size());
    c.share = Eigen::MatrixXd::Zero(num_experts, num_experts);
    if (c.has_mass()) c.share = c.coactivations.cast<double>() / static_cast<double>(c.pair_total);
    return c;
}

LayerPolicy LayerPolicy::parse(std::string_view text) {
    if (text == "first") return first();
    if (text == "median") return median();
    if (text == "last") return last();
    int index = -1;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), index);
    if (ec != std::errc{} || ptr != text.data() + text.size() || index < 0)
        throw Error("invalid layer policy '" + std::string(text) + "'");
    return at(index);
}

std::string LayerPolicy::to_string() const {
    switch (kind) {
        case Kind::First: return "first";
        case Kind::Median: return "median";
        case Kind::Last: return "last";
        case Kind::Explicit: break;
    }
    return std::to_string(index);
}

int LayerPolicy::resolve(int num_layers) const {
    if (num_layers < 1) throw Error("trace set has no layers");
    switch (kind) {
        case Kind::First: return 0;
        case Kind::Median: return (num_layers - 1) / 2;
        case Kind::Last: return num_layers - 1;
        case Kind::Explicit: break;
    }
    if (index < 0 || index >= num_layers)
        throw Error("layer index " + std::to_string(index) + " out of range [0, " +
                    std::to_string(num_layers) + ")");
    return index;
}

SignatureBundle signature_bundle(const RoutingTraceSet& traces, LayerPolicy policy) {
    if (traces.traces.empty()) throw Error("trace set '" + traces.model_id + "' is empty");
    const int layer = policy.resolve(traces.num_layers());
    return {traces.model_id, compute_specialization(traces, layer),
            compute_collaboration(traces, layer)};
}

}  // namespace routesig
