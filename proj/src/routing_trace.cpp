#include "routesig/routing_trace.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace routesig {

using ordered_json = nlohmann::ordered_json;

bool ExpertSelection::contains(int expert) const noexcept {
    return std::find(selected.begin(), selected.end(), expert) != selected.end();
}

const ExpertSelection* QueryTrace::selection(int layer) const noexcept {
    auto it = std::lower_bound(selections.begin(), selections.end(), layer,
                               [](const ExpertSelection& s, int l) { return s.layer < l; });
    if (it == selections.end() || it->layer != layer) return nullptr;
    return &*it;
}

std::vector<std::int64_t> RoutingTraceSet::domain_counts() const {
    std::vector<std::int64_t> counts(domains.size(), 0);
    for (const auto& t : traces) ++counts.at(static_cast<std::size_t>(t.domain));
    return counts;
}

namespace {

void check_selection(const ExpertSelection& s, const std::vector<int>& experts_per_layer,
                     std::size_t line) {
    if (s.layer < 0 || s.layer >= static_cast<int>(experts_per_layer.size()))
        throw TraceError(line, "layer " + std::to_string(s.layer) + " out of range [0, " +
                                   std::to_string(experts_per_layer.size()) + ")");
    const int num_experts = experts_per_layer[static_cast<std::size_t>(s.layer)];
    if (s.selected.empty()) throw TraceError(line, "empty expert selection");
    std::vector<int> sorted = s.selected;
    std::sort(sorted.begin(), sorted.end());
    for (int e : sorted) {
        if (e < 0 || e >= num_experts)
            throw TraceError(line, "expert index " + std::to_string(e) + " out of range [0, " +
                                       std::to_string(num_experts) + ") for layer " +
                                       std::to_string(s.layer));
    }
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw TraceError(line, "duplicate expert index in selection");
    if (!s.gates.empty() && static_cast<int>(s.gates.size()) != num_experts)
        throw TraceError(line, "gates length " + std::to_string(s.gates.size()) +
                                   " does not match expert count " + std::to_string(num_experts));
}

}  // namespace

void RoutingTraceSet::validate() const {
    for (int e : experts_per_layer)
        if (e < 1) throw TraceError(0, "every layer needs at least one expert");
    std::unordered_map<std::string_view, int> seen;
    for (const auto& t : traces) {
        if (t.domain < 0 || t.domain >= num_domains())
            throw TraceError(0, "query '" + t.query_id + "' has unknown domain id");
        if (!seen.emplace(t.query_id, 0).second)
            throw TraceError(0, "query '" + t.query_id + "' appears twice");
        for (std::size_t i = 0; i < t.selections.size(); ++i) {
            check_selection(t.selections[i], experts_per_layer, 0);
            if (i > 0 && t.selections[i - 1].layer >= t.selections[i].layer)
                throw TraceError(0, "query '" + t.query_id +
                                        "' has unsorted or duplicate layer selections");
        }
    }
}

int binary_activation(const QueryTrace& trace, int layer, int expert) {
    const ExpertSelection* s = trace.selection(layer);
    if (!s)
        throw TraceError(0, "query '" + trace.query_id + "' has no selection at layer " +
                                std::to_string(layer));
    return s->contains(expert) ? 1 : 0;
}

namespace {

template <typename T>
T field(const ordered_json& rec, const char* key, std::size_t line) {
    auto it = rec.find(key);
    if (it == rec.end()) throw TraceError(line, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw TraceError(line, std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace

RoutingTraceSet read_traces(std::istream& in, std::string_view schema) {
    RoutingTraceSet set;
    std::string text;
    std::size_t line_no = 0;
    bool have_header = false;
    bool declared_domains = false;
    std::unordered_map<std::string, int> domain_ids;
    std::unordered_map<std::string, std::size_t> query_index;

    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        ordered_json rec;
        try {
            rec = ordered_json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw TraceError(line_no, std::string("malformed record: ") + e.what());
        }
        if (!rec.is_object()) throw TraceError(line_no, "record is not an object");

        if (!have_header) {
            const auto version = field<std::string>(rec, "schema", line_no);
            if (version != schema)
                throw TraceError(line_no, "schema '" + version + "' does not match expected '" +
                                              std::string(schema) + "'");
            set.model_id = field<std::string>(rec, "model_id", line_no);
            const auto layers = field<int>(rec, "num_layers", line_no);
            set.experts_per_layer = field<std::vector<int>>(rec, "experts_per_layer", line_no);
            if (layers < 1 || static_cast<std::size_t>(layers) != set.experts_per_layer.size())
                throw TraceError(line_no, "num_layers disagrees with experts_per_layer");
            for (int e : set.experts_per_layer)
                if (e < 1) throw TraceError(line_no, "every layer needs at least one expert");
            if (rec.contains("domains")) {
                declared_domains = true;
                set.domains = field<std::vector<std::string>>(rec, "domains", line_no);
                for (std::size_t d = 0; d < set.domains.size(); ++d)
                    if (!domain_ids.emplace(set.domains[d], static_cast<int>(d)).second)
                        throw TraceError(line_no, "duplicate domain label '" + set.domains[d] + "'");
            }
            if (auto p = rec.find("provenance"); p != rec.end() && p->is_object()) {
                set.provenance.tool = p->value("tool", set.provenance.tool);
                if (p->contains("seed") && !(*p)["seed"].is_null())
                    set.provenance.seed = (*p)["seed"].get<std::uint64_t>();
                set.provenance.config_digest = p->value("config_digest", std::string{});
            }
            have_header = true;
            continue;
        }

        auto query_id = field<std::string>(rec, "query_id", line_no);
        const auto label = field<std::string>(rec, "domain", line_no);
        ExpertSelection sel;
        sel.layer = field<int>(rec, "layer", line_no);
        sel.selected = field<std::vector<int>>(rec, "selected", line_no);
        if (rec.contains("gates")) sel.gates = field<std::vector<double>>(rec, "gates", line_no);
        check_selection(sel, set.experts_per_layer, line_no);

        int domain;
        if (auto it = domain_ids.find(label); it != domain_ids.end()) {
            domain = it->second;
        } else if (declared_domains) {
            throw TraceError(line_no, "unknown domain label '" + label + "'");
        } else {
            domain = static_cast<int>(set.domains.size());
            set.domains.push_back(label);
            domain_ids.emplace(label, domain);
        }

        auto [it, fresh] = query_index.emplace(query_id, set.traces.size());
        if (fresh) set.traces.push_back(QueryTrace{std::move(query_id), domain, {}});
        QueryTrace& q = set.traces[it->second];
        if (q.domain != domain)
            throw TraceError(line_no, "query '" + q.query_id + "' changes domain label");
        auto pos = std::lower_bound(q.selections.begin(), q.selections.end(), sel.layer,
                                    [](const ExpertSelection& s, int l) { return s.layer < l; });
        if (pos != q.selections.end() && pos->layer == sel.layer)
            throw TraceError(line_no, "duplicate record for query '" + q.query_id + "' at layer " +
                                          std::to_string(sel.layer));
        q.selections.insert(pos, std::move(sel));
    }
    if (!have_header) throw TraceError(line_no, "missing header line");
    return set;
}

RoutingTraceSet ingest_traces(const std::filesystem::path& path, std::string_view schema) {
    std::ifstream in(path);
    if (!in) throw TraceError(0, "cannot open trace file " + path.string());
    return read_traces(in, schema);
}

void write_traces(std::ostream& out, const RoutingTraceSet& set) {
    ordered_json header;
    header["schema"] = kTraceSchema;
    header["model_id"] = set.model_id;
    header["num_layers"] = set.num_layers();
    header["experts_per_layer"] = set.experts_per_layer;
    header["domains"] = set.domains;
    ordered_json prov;
    prov["tool"] = set.provenance.tool;
    prov["seed"] = set.provenance.seed ? ordered_json(*set.provenance.seed) : ordered_json(nullptr);
    prov["config_digest"] = set.provenance.config_digest;
    header["provenance"] = std::move(prov);
    out << header.dump() << '\n';

    for (const auto& t : set.traces) {
        for (const auto& s : t.selections) {
            ordered_json rec;
            rec["query_id"] = t.query_id;
            rec["domain"] = set.domains.at(static_cast<std::size_t>(t.domain));
            rec["layer"] = s.layer;
            rec["selected"] = s.selected;
            if (!s.gates.empty()) rec["gates"] = s.gates;
            out << rec.dump() << '\n';
        }
    }
}

void write_traces(const std::filesystem::path& path, const RoutingTraceSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trace file " + path.string());
    write_traces(out, set);
    if (!out) throw Error("failed writing trace file " + path.string());
}

}  // namespace routesig
