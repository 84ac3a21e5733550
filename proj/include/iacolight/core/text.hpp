#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace iacolight
{
    /// Shortest decimal text that round-trips to the same double.
    inline std::string format_double(double v)
    {
        if (std::isnan(v))
        {
            return "NA";
        }
        if (v == 0.0)
        {
            v = 0.0; // drop the sign of negative zero
        }
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    }

    inline std::string format_optional(const std::optional<double> &v)
    {
        return v ? format_double(*v) : std::string("NA");
    }

    inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : text)
        {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    inline std::string to_hex(std::uint64_t v)
    {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 15; i >= 0; --i)
        {
            out[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

} // namespace iacolight
