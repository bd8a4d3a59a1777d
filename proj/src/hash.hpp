#pragma once

#include <cstdint>
#include <string_view>

namespace panelwatch {

/// FNV-1a; stable across platforms, used to key random streams by panel id.
inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace panelwatch
