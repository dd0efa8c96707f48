#pragma once

#include <cmath>
#include <complex>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/vec.hpp"

namespace stobas {

using Complex = std::complex<double>;

struct DifferenceCurve {
    Complex lambda;
    std::vector<std::pair<long long, double>> points; // (N, h)
};

namespace detail {

inline Complex pow_int(Complex z, long long n) {
    Complex r(1.0, 0.0);
    while (n > 0) {
        if (n & 1) r *= z;
        z *= z;
        n >>= 1;
    }
    return r;
}

inline Complex expm1_c(Complex z) {
    if (std::abs(z) > 1e-4) return std::exp(z) - 1.0;
    // 4-term series; |z| <= 1e-4 keeps the truncation below 1e-21.
    return z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)));
}

// (1 - lambda^N) / (N (1 - lambda)) with the lambda -> 1 cancellation handled
// through log1p/expm1 once |1 - lambda| drops below 1e-8.
inline Complex ergodic_mean_scalar(Complex lambda, long long n) {
    Complex u1 = 1.0 - lambda;
    if (std::abs(u1) == 0.0) return 1.0;
    if (std::abs(u1) < 1e-8) {
        Complex log_lambda = -(u1 + 0.5 * u1 * u1); // log(1 - u1), next term ~ u1^3
        Complex z = static_cast<double>(n) * log_lambda;
        return -expm1_c(z) / (static_cast<double>(n) * u1);
    }
    return (1.0 - pow_int(lambda, n)) / (static_cast<double>(n) * u1);
}

// eps / (1 - (1-eps) lambda) at eps = 2/(N+1), written as eps / (u1 + eps lambda)
// so the denominator is assembled without cancellation.
inline Complex geometric_mean_scalar(Complex lambda, long long n) {
    double eps = 2.0 / (static_cast<double>(n) + 1.0);
    Complex u1 = 1.0 - lambda;
    return eps / (u1 + eps * lambda);
}

} // namespace detail

/// Difference between the N-horizon ergodic mean and the geometric mean with
/// the expectation-matched rate eps = 2/(N+1), evaluated on the eigenvalue:
/// h(lambda, N) = | (1/N)(1-lambda^N)/(1-lambda) - eps/(1-(1-eps)lambda) |.
inline double h_lambda_N(Complex lambda, long long n) {
    if (n < 1) throw ValidationError("h_lambda_N: N must be >= 1");
    if (std::abs(lambda) > 1.0 + 1e-12)
        throw ValidationError("h_lambda_N: |lambda| must be <= 1");
    return std::abs(detail::ergodic_mean_scalar(lambda, n) -
                    detail::geometric_mean_scalar(lambda, n));
}

inline double h_lambda_N(double lambda, long long n) { return h_lambda_N(Complex(lambda, 0.0), n); }

/// Bound for a state mixed from several eigenvectors: beta sum_i alpha_i h(lambda_i, N).
inline double combined_difference_bound(const std::vector<Complex>& lambdas, const Vec& alphas,
                                        double beta, long long n) {
    if (lambdas.size() != alphas.size())
        throw DimensionMismatch("combined_difference_bound: weight count mismatch");
    if (beta < 0.0 || beta > 1.0)
        throw WeightViolation("combined_difference_bound: beta outside [0, 1]");
    double sum = 0.0;
    for (size_t i = 0; i < lambdas.size(); ++i) {
        if (alphas[i] < 0.0 || alphas[i] > 1.0)
            throw WeightViolation("combined_difference_bound: alpha outside [0, 1]");
        sum += alphas[i] * h_lambda_N(lambdas[i], n);
    }
    return beta * sum;
}

inline std::vector<DifferenceCurve> compute_difference_curves(const std::vector<Complex>& lambdas,
                                                              const std::vector<long long>& horizons) {
    if (lambdas.empty()) throw ValidationError("difference curves: empty eigenvalue list");
    if (horizons.empty()) throw ValidationError("difference curves: empty N grid");
    std::vector<DifferenceCurve> curves;
    for (Complex lambda : lambdas) {
        DifferenceCurve c;
        c.lambda = lambda;
        for (long long n : horizons) c.points.push_back({n, h_lambda_N(lambda, n)});
        curves.push_back(std::move(c));
        if (lambda.imag() != 0.0) {
            // companion curve at the same modulus on the real axis
            DifferenceCurve r;
            r.lambda = Complex(std::abs(lambda), 0.0);
            for (long long n : horizons) r.points.push_back({n, h_lambda_N(r.lambda, n)});
            curves.push_back(std::move(r));
        }
    }
    return curves;
}

/// CSV emission, columns re_lambda,im_lambda,N,h. Complex eigenvalues are
/// paired with the real-axis curve at the same modulus.
inline void difference_curve_sweep(const std::vector<Complex>& lambdas,
                                   const std::vector<long long>& horizons, std::ostream& os) {
    auto curves = compute_difference_curves(lambdas, horizons);
    os << "re_lambda,im_lambda,N,h\n";
    os << std::setprecision(17);
    for (const auto& c : curves)
        for (auto [n, h] : c.points)
            os << c.lambda.real() << ',' << c.lambda.imag() << ',' << n << ',' << h << '\n';
}

} // namespace stobas
