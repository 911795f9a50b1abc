#include "routesig/report.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <json.hpp>

namespace routesig {

std::optional<double> percent_change(std::optional<double> d_kd, std::optional<double> d_scratch) {
    if (!d_kd || !d_scratch || *d_scratch == 0.0) return std::nullopt;
    return 100.0 * (*d_kd - *d_scratch) / *d_scratch;
}

std::string format_number(double value) {
    if (value == 0.0) value = 0.0;  // no "-0"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

namespace {

std::string cell(std::optional<double> v) { return v ? format_number(*v) : std::string{}; }

void write_csv(std::ostream& out, const BenchmarkReport& report, const Provenance& provenance) {
    out << "# tool=" << provenance.tool << '\n';
    out << "# seed=" << (provenance.seed ? std::to_string(*provenance.seed) : "none") << '\n';
    out << "# config_digest=" << provenance.config_digest << '\n';
    out << "# layer=" << report.layer << " mode=" << to_string(report.options.mode) << '\n';
    out << "# accuracy=" << format_number(report.accuracy) << '\n';
    out << "domain,d_spec_kd,d_spec_scratch,d_collab_kd,d_collab_scratch,margin,verdict,tie,"
           "spec_change_pct,collab_change_pct\n";
    for (const auto& r : report.rows) {
        const auto& kd = r.distilled();
        const auto& sc = r.scratch();
        out << r.label << ',' << format_number(kd.d_spec) << ',' << format_number(sc.d_spec) << ','
            << cell(kd.d_collab) << ',' << cell(sc.d_collab) << ',' << format_number(r.margin) << ','
            << (r.verdict.predicted == 1 ? "kd" : "scratch") << ','
            << (r.verdict.tie ? "true" : "false") << ','
            << cell(percent_change(kd.d_spec, sc.d_spec)) << ','
            << cell(percent_change(kd.d_collab, sc.d_collab)) << '\n';
    }
}

nlohmann::ordered_json optional_json(std::optional<double> v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void write_json(std::ostream& out, const BenchmarkReport& report, const Provenance& provenance) {
    nlohmann::ordered_json j;
    j["provenance"] = {{"tool", provenance.tool},
                       {"seed", provenance.seed ? nlohmann::ordered_json(*provenance.seed)
                                                : nlohmann::ordered_json(nullptr)},
                       {"config_digest", provenance.config_digest}};
    j["layer"] = report.layer;
    j["mode"] = to_string(report.options.mode);
    j["accuracy"] = report.accuracy;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["domain"] = r.label;
        row["score_kd"] = r.distilled().score;
        row["score_scratch"] = r.scratch().score;
        row["d_spec_kd"] = r.distilled().d_spec;
        row["d_spec_scratch"] = r.scratch().d_spec;
        row["d_collab_kd"] = optional_json(r.distilled().d_collab);
        row["d_collab_scratch"] = optional_json(r.scratch().d_collab);
        row["margin"] = r.margin;
        row["verdict"] = r.verdict.predicted == 1 ? "kd" : "scratch";
        row["tie"] = r.verdict.tie;
        row["correct"] = r.correct;
        row["spec_change_pct"] = optional_json(percent_change(r.distilled().d_spec, r.scratch().d_spec));
        row["collab_change_pct"] =
            optional_json(percent_change(r.distilled().d_collab, r.scratch().d_collab));
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    out << j.dump(2) << '\n';
}

}  // namespace

void write_report(std::ostream& out, const BenchmarkReport& report, const Provenance& provenance,
                  ReportFormat format) {
    if (format == ReportFormat::Csv)
        write_csv(out, report, provenance);
    else
        write_json(out, report, provenance);
}

void emit_report(const std::filesystem::path& path, const BenchmarkReport& report,
                 const Provenance& provenance, ReportFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write report " + path.string());
    write_report(out, report, provenance, format);
    if (!out) throw Error("failed writing report " + path.string());
}

}  // namespace routesig
