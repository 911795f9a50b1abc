#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace routesig {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible shapes, domain axes, or zero-mass flags between signatures.
class ShapeError : public Error {
public:
    using Error::Error;
};

std::string_view tool_version();

/// Hex FNV-1a digest of an arbitrary text blob (typically a canonical config dump).
std::string config_digest(std::string_view text);

/// Recorded in every artifact the tools write.
struct Provenance {
    std::string tool = std::string("routesig ") + ROUTESIG_VERSION;
    std::optional<std::uint64_t> seed;
    std::string config_digest;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

}  // namespace routesig
