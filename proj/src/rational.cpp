#include "twsc/rational.hpp"

#include <cmath>
#include <cstdint>

namespace twsc {

std::optional<Rat> parse_rational(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) {
            return Rat(BigInt(text));
        }
        BigInt num(text.substr(0, slash));
        BigInt den(text.substr(slash + 1));
        if (den == 0) return std::nullopt;
        return Rat(num, den);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string format_rational(const Rat& value) {
    if (denominator(value) == 1) return numerator(value).str();
    return numerator(value).str() + "/" + denominator(value).str();
}

Rat rational_from_double(double value) {
    if (!std::isfinite(value)) throw ValidationError("non-finite double cannot become a rational");
    if (value == 0.0) return Rat(0);
    int exp = 0;
    double mant = std::frexp(value, &exp);  // value = mant * 2^exp, |mant| in [0.5, 1)
    // 53 doublings make the mantissa integral.
    std::int64_t scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
    exp -= 53;
    Rat result(scaled);
    if (exp >= 0) {
        result *= Rat(BigInt(1) << exp);
    } else {
        result /= Rat(BigInt(1) << (-exp));
    }
    return result;
}

}  // namespace twsc
