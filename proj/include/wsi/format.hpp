#pragma once

#include <string>

namespace wsi {

/// Shortest decimal string that round-trips to the same double. Always uses
/// '.' as the decimal separator regardless of the global locale.
std::string format_shortest(double value);

/// Fixed-point with `decimals` digits, rounding half away from zero on the
/// shortest decimal representation of `value` (so 0.0005 -> "0.001").
std::string format_fixed(double value, int decimals);

}  // namespace wsi
