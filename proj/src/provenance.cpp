#include "routesig/provenance.hpp"

#include <cstdio>

#include "routesig/rng.hpp"

namespace routesig {

std::string_view tool_version() { return ROUTESIG_VERSION; }

std::string config_digest(std::string_view text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(text)));
    return buf;
}

}  // namespace routesig
