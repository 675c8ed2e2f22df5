#pragma once

#include <cstdio>
#include <string>

namespace traceauth::detail {

// 17 significant digits: enough to round-trip any double exactly, and
// deterministic for identical bit patterns (reproducible CSV/model files).
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace traceauth::detail
