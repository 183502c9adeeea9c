#pragma once

#include <string>

namespace riou {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

}  // namespace riou
