#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <stdexcept>
#include <string>

namespace twsc {

// Exact arithmetic is the canonical number type throughout; doubles appear
// only inside the LP solver's float mode.
using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Raised when an internal invariant that "cannot" fail does fail. A thrown
// IntegrityError is a test signal, not a usage error.
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed input: files, parameters, preconditions.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Parses "p/q" or "p" (optionally signed). Returns nullopt on garbage.
std::optional<Rat> parse_rational(const std::string& text);

// Canonical "p/q" form; integers render without the "/1".
std::string format_rational(const Rat& value);

inline double to_double(const Rat& value) { return static_cast<double>(value); }

// Exact rational from a double (doubles are dyadic, so this is lossless).
Rat rational_from_double(double value);

}  // namespace twsc
