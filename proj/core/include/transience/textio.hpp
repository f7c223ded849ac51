#pragma once

#include <string>

namespace transience {

/// Shortest decimal form that round-trips a double (%.17g, trimmed).
/// All text outputs use this so re-runs are byte-identical.
std::string format_double(double value);

}  // namespace transience
