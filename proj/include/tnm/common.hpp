#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace tnm {

/// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor/vector dimension mismatch; the message names the offending axis.
struct ShapeError : Error {
    using Error::Error;
};

/// Trajectory blow-up or non-finite state during integration.
struct IntegrationError : Error {
    long step_index;
    IntegrationError(const std::string& msg, long step = -1)
        : Error(step >= 0 ? msg + " at integration step " + std::to_string(step) : msg),
          step_index(step) {}
};

/// Invalid configuration (bad fractions, empty split, unknown config key, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Not enough data for the requested operation.
struct DataError : Error {
    using Error::Error;
};

/// Training loss became non-finite or exceeded the guard value.
struct DivergenceError : Error {
    int epoch;
    DivergenceError(const std::string& msg, int at_epoch)
        : Error(msg + " at epoch " + std::to_string(at_epoch)), epoch(at_epoch) {}
};

/// Model or config document cannot be decoded.
struct SerializationError : Error {
    using Error::Error;
};

/// 17 significant digits: enough to round-trip any IEEE double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline bool is_finite(double v) { return std::isfinite(v); }

// Deterministic draws derived from raw mt19937_64 output. The standard
// distributions are implementation-defined, so they are avoided for any
// value that ends up in a model or an output file.

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [-bound, bound).
inline double uniform_symmetric(std::mt19937_64& rng, double bound) {
    return bound * (2.0 * uniform_unit(rng) - 1.0);
}

/// Uniform integer in [0, n), n > 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace tnm
