#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "routesig/provenance.hpp"

namespace routesig {

inline constexpr std::string_view kTraceSchema = "routesig.trace/1";

/// Malformed or inconsistent trace input. `line()` is 1-based, 0 when not tied to a line.
class TraceError : public Error {
public:
    TraceError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The top-k set chosen at one layer for one query, in router rank order.
struct ExpertSelection {
    int layer = 0;
    std::vector<int> selected;
    /// Optional softmax gates over all experts of the layer. Carried through
    /// files but never read by the signatures.
    std::vector<double> gates;

    int k() const noexcept { return static_cast<int>(selected.size()); }
    bool contains(int expert) const noexcept;

    friend bool operator==(const ExpertSelection&, const ExpertSelection&) = default;
};

struct QueryTrace {
    std::string query_id;
    /// Index into RoutingTraceSet::domains (label id = domain + 1 in files).
    int domain = 0;
    /// At most one entry per layer, sorted by layer.
    std::vector<ExpertSelection> selections;

    /// nullptr when the query has no record for `layer`.
    const ExpertSelection* selection(int layer) const noexcept;

    friend bool operator==(const QueryTrace&, const QueryTrace&) = default;
};

struct RoutingTraceSet {
    std::string model_id;
    std::vector<int> experts_per_layer;
    std::vector<std::string> domains;
    std::vector<QueryTrace> traces;
    Provenance provenance;

    int num_layers() const noexcept { return static_cast<int>(experts_per_layer.size()); }
    int num_domains() const noexcept { return static_cast<int>(domains.size()); }
    std::size_t size() const noexcept { return traces.size(); }

    /// n_d per domain; sums to size().
    std::vector<std::int64_t> domain_counts() const;

    /// Checks every invariant of the data model; throws TraceError.
    void validate() const;

    friend bool operator==(const RoutingTraceSet&, const RoutingTraceSet&) = default;
};

/// a_i(x) for the top-k set at `layer`. Throws TraceError when the layer is missing.
int binary_activation(const QueryTrace& trace, int layer, int expert);

RoutingTraceSet read_traces(std::istream& in, std::string_view schema = kTraceSchema);
RoutingTraceSet ingest_traces(const std::filesystem::path& path,
                              std::string_view schema = kTraceSchema);

/// Header line followed by one record per (query, layer), in trace then layer order.
void write_traces(std::ostream& out, const RoutingTraceSet& traces);
void write_traces(const std::filesystem::path& path, const RoutingTraceSet& traces);

}  // namespace routesig
