#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eoslab {

using ParamVector = std::vector<double>;

// Base for all recoverable failures raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct NumericalOverflow : Error {
    using Error::Error;
};

// ---- small dense-vector helpers (double precision throughout) ----

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm1(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += std::abs(v);
    return s;
}

inline double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw DimensionMismatch("axpy: size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
    for (double& v : x) v *= alpha;
}

inline ParamVector hadamard(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("hadamard: size mismatch");
    ParamVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

// entrywise power w^(.p) with integer exponent
inline ParamVector hadamard_pow(std::span<const double> w, int p) {
    ParamVector out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        double v = 1.0;
        for (int k = 0; k < p; ++k) v *= w[i];
        out[i] = v;
    }
    return out;
}

inline bool all_finite(std::span<const double> a) {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// shortest-format decimal printing that round-trips a double exactly
std::string format_double(double v);

}  // namespace eoslab
