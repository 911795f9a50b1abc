#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "routesig/provenance.hpp"
#include "routesig/signatures.hpp"

namespace routesig {

inline constexpr std::string_view kSignatureSchema = "routesig.signature/1";

/// JSON document holding both signatures of one layer, with the integer counts
/// they were derived from, the domain mapping and provenance.
void write_signature(std::ostream& out, const SignatureBundle& bundle, const Provenance& provenance);
void write_signature(const std::filesystem::path& path, const SignatureBundle& bundle,
                     const Provenance& provenance);

/// Rebuilds the normalized matrices from the stored counts, so a loaded bundle
/// is bitwise equal to the one that was written.
SignatureBundle read_signature(std::istream& in, Provenance* provenance = nullptr);
SignatureBundle read_signature(const std::filesystem::path& path, Provenance* provenance = nullptr);

/// Long-form CSV, one row per (domain, expert): domain,expert,share.
void write_profile_csv(std::ostream& out, const SpecializationProfile& profile);

}  // namespace routesig
