#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "routesig/detector.hpp"
#include "routesig/provenance.hpp"

namespace routesig {

/// Relative distance change of the distilled model against the scratch model,
/// in percent: 100 (d_kd - d_scratch) / d_scratch. Negative when the distilled
/// model is closer. Absent when d_scratch is zero or either side is missing.
std::optional<double> percent_change(std::optional<double> d_kd, std::optional<double> d_scratch);

/// Fixed "%.10g" rendering used by every machine-readable output.
std::string format_number(double value);

enum class ReportFormat { Csv, Json };

/// CSV: '#'-prefixed provenance and accuracy lines, then the columns
/// domain,d_spec_kd,d_spec_scratch,d_collab_kd,d_collab_scratch,margin,verdict,tie,
/// spec_change_pct,collab_change_pct.
void write_report(std::ostream& out, const BenchmarkReport& report, const Provenance& provenance,
                  ReportFormat format);
void emit_report(const std::filesystem::path& path, const BenchmarkReport& report,
                 const Provenance& provenance, ReportFormat format);

}  // namespace routesig
