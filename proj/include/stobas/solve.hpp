#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/vec.hpp"

namespace stobas {

struct SolveReport {
    Index iterations = 0;
    double residual = 0.0; // absolute 2-norm of b - A x
    bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations.
/// `apply` computes y = A x. Returns the best iterate encountered; the report
/// carries the absolute residual so callers can apply their own acceptance
/// threshold; for near-singular systems the attainable residual is limited by
/// round-off, not by iteration count.
inline Vec gmres(const std::function<void(const Vec&, Vec&)>& apply, const Vec& b, Vec x,
                 double rtol, Index max_iter, Index restart, SolveReport& report) {
    const Index n = static_cast<Index>(b.size());
    if (x.empty()) x.assign(static_cast<size_t>(n), 0.0);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        report = {0, 0.0, true};
        return Vec(static_cast<size_t>(n), 0.0);
    }
    const double target = rtol * bnorm;
    restart = std::min(restart, n);

    Vec best_x = x;
    double best_res = std::numeric_limits<double>::infinity();
    Index total_iters = 0;
    double prev_cycle_res = std::numeric_limits<double>::infinity();

    Vec r(static_cast<size_t>(n)), w(static_cast<size_t>(n));
    std::vector<Vec> basis;
    std::vector<double> hess; // packed column-major Hessenberg, (restart+1) x restart
    Vec cs(static_cast<size_t>(restart)), sn(static_cast<size_t>(restart)),
        g(static_cast<size_t>(restart) + 1);

    while (total_iters < max_iter) {
        apply(x, r);
        for (Index i = 0; i < n; ++i) r[static_cast<size_t>(i)] = b[static_cast<size_t>(i)] - r[static_cast<size_t>(i)];
        double beta = norm2(r);
        if (beta < best_res) {
            best_res = beta;
            best_x = x;
        }
        if (beta <= target) {
            report = {total_iters, beta, true};
            return x;
        }
        // Stagnation across restart cycles: round-off floor reached.
        if (beta > 0.999 * prev_cycle_res && total_iters > 0) break;
        prev_cycle_res = beta;

        basis.assign(1, r);
        scale(basis[0], 1.0 / beta);
        hess.assign(static_cast<size_t>((restart + 1) * restart), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        Index k = 0;
        for (; k < restart && total_iters < max_iter; ++k, ++total_iters) {
            apply(basis[static_cast<size_t>(k)], w);
            for (Index i = 0; i <= k; ++i) {
                double h = dot(w, basis[static_cast<size_t>(i)]);
                hess[static_cast<size_t>(k * (restart + 1) + i)] = h;
                axpy(w, -h, basis[static_cast<size_t>(i)]);
            }
            double hkk = norm2(w);
            hess[static_cast<size_t>(k * (restart + 1) + k + 1)] = hkk;
            if (hkk > 0.0) {
                Vec v = w;
                scale(v, 1.0 / hkk);
                basis.push_back(std::move(v));
            }
            // Apply accumulated rotations to the new column.
            double* col = &hess[static_cast<size_t>(k * (restart + 1))];
            for (Index i = 0; i < k; ++i) {
                double t = cs[static_cast<size_t>(i)] * col[i] + sn[static_cast<size_t>(i)] * col[i + 1];
                col[i + 1] = -sn[static_cast<size_t>(i)] * col[i] + cs[static_cast<size_t>(i)] * col[i + 1];
                col[i] = t;
            }
            double denom = std::hypot(col[k], col[k + 1]);
            if (denom == 0.0) {
                cs[static_cast<size_t>(k)] = 1.0;
                sn[static_cast<size_t>(k)] = 0.0;
            } else {
                cs[static_cast<size_t>(k)] = col[k] / denom;
                sn[static_cast<size_t>(k)] = col[k + 1] / denom;
            }
            col[k] = denom;
            col[k + 1] = 0.0;
            g[static_cast<size_t>(k) + 1] = -sn[static_cast<size_t>(k)] * g[static_cast<size_t>(k)];
            g[static_cast<size_t>(k)] = cs[static_cast<size_t>(k)] * g[static_cast<size_t>(k)];
            if (std::fabs(g[static_cast<size_t>(k) + 1]) <= target || hkk == 0.0) {
                ++k;
                ++total_iters;
                break;
            }
        }
        // Back-substitute the k x k triangular system.
        Vec ym(static_cast<size_t>(k), 0.0);
        for (Index i = k - 1; i >= 0; --i) {
            double s = g[static_cast<size_t>(i)];
            for (Index j = i + 1; j < k; ++j)
                s -= hess[static_cast<size_t>(j * (restart + 1) + i)] * ym[static_cast<size_t>(j)];
            ym[static_cast<size_t>(i)] = s / hess[static_cast<size_t>(i * (restart + 1) + i)];
        }
        for (Index j = 0; j < k; ++j) axpy(x, ym[static_cast<size_t>(j)], basis[static_cast<size_t>(j)]);
    }

    apply(x, r);
    for (Index i = 0; i < n; ++i) r[static_cast<size_t>(i)] = b[static_cast<size_t>(i)] - r[static_cast<size_t>(i)];
    double res = norm2(r);
    if (res < best_res) {
        best_res = res;
        best_x = x;
    }
    report = {total_iters, best_res, best_res <= target};
    return best_x;
}

} // namespace stobas
