#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stobas/errors.hpp"

namespace stobas {

using Vec = std::vector<double>;
using Index = std::ptrdiff_t;

inline void check_same_size(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size())
        throw DimensionMismatch(std::string(where) + ": vector sizes " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()) + " differ");
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline void axpy(Vec& y, double alpha, const Vec& x) {
    for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& v, double alpha) {
    for (double& x : v) x *= alpha;
}

inline double norm1(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

inline double norm_sup(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline double sup_diff(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline Vec indicator(Index n, const std::vector<Index>& set) {
    Vec v(static_cast<size_t>(n), 0.0);
    for (Index i : set) v[static_cast<size_t>(i)] = 1.0;
    return v;
}

} // namespace stobas
