#include "riou/format.hpp"

#include <array>
#include <charconv>

namespace riou {

std::string format_double(double v)
{
    if (v == 0.0) {
        v = 0.0;  // drop the sign of negative zero
    }
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf.data(), end);
}

}  // namespace riou
