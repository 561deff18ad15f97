#pragma once

#include <string>

namespace fvlab {

/// Shortest round-trip decimal form; "inf" / "-inf" / "nan" for non-finite.
std::string format_double(double x);

}  // namespace fvlab
