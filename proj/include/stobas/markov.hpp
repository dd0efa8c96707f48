#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "stobas/dense.hpp"
#include "stobas/errors.hpp"
#include "stobas/solve.hpp"
#include "stobas/sparse.hpp"
#include "stobas/vec.hpp"

namespace stobas {

enum class Side { left, right };
enum class GeometricMethod { series, solve };

/// rho(k) = rho(k-1)^T M.
inline ProbabilityVector step_distribution(const ProbabilityVector& rho,
                                           const SparseStochasticMatrix& m) {
    if (rho.size() != m.size()) throw DimensionMismatch("step_distribution");
    return ProbabilityVector(m.apply_left(rho.values()));
}

/// Ergodic mean (1/N) sum_{k=0}^{N-1} of M^k applied to v, by iterated
/// products with a running accumulator; M^k is never materialized.
inline Vec cesaro_average_apply(const SparseStochasticMatrix& m, const Vec& v, long long horizon,
                                Side side = Side::right) {
    if (static_cast<Index>(v.size()) != m.size()) throw DimensionMismatch("cesaro_average_apply");
    if (horizon < 1) throw ValidationError("cesaro_average_apply: horizon must be >= 1");
    Vec sum = v;
    Vec cur = v;
    Vec next;
    for (long long k = 1; k < horizon; ++k) {
        if (side == Side::right)
            m.apply_right(cur, next);
        else
            m.apply_left(cur, next);
        cur.swap(next);
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += cur[i];
    }
    scale(sum, 1.0 / static_cast<double>(horizon));
    return sum;
}

namespace detail {

inline void apply_side(const SparseStochasticMatrix& m, Side side, const Vec& x, Vec& y) {
    if (side == Side::right)
        m.apply_right(x, y);
    else
        m.apply_left(x, y);
}

// Richardson iteration x <- eps v + (1-eps) M x. Contraction factor (1-eps)
// in the sup norm (right) / L1 norm (left) gives the certified error bound
// ||x_k - x*|| <= (1-eps)/eps ||x_{k+1} - x_k||.
inline Vec richardson_geometric(const SparseStochasticMatrix& m, const Vec& v, double eps,
                                Side side, double tol, SolveReport& report) {
    const double q = 1.0 - eps;
    const double vscale = std::max(1.0, side == Side::right ? norm_sup(v) : norm1(v));
    Vec x(v.size());
    for (size_t i = 0; i < v.size(); ++i) x[i] = eps * v[i];
    Vec mx, xnew(v.size());
    const Index max_iter = static_cast<Index>(std::ceil(80.0 / eps)) + 16;
    for (Index it = 0; it < max_iter; ++it) {
        apply_side(m, side, x, mx);
        double delta = 0.0;
        if (side == Side::right) {
            for (size_t i = 0; i < x.size(); ++i) {
                xnew[i] = eps * v[i] + q * mx[i];
                delta = std::max(delta, std::fabs(xnew[i] - x[i]));
            }
        } else {
            for (size_t i = 0; i < x.size(); ++i) {
                xnew[i] = eps * v[i] + q * mx[i];
                delta += std::fabs(xnew[i] - x[i]);
            }
        }
        x.swap(xnew);
        if (delta * q / eps <= tol * vscale) {
            report = {it + 1, delta * q / eps, true};
            return x;
        }
    }
    throw SolverDivergence("richardson_geometric: no convergence after " +
                           std::to_string(max_iter) + " iterations");
}

// GTH factorization of I - (1-eps) M (right side only).
inline GthSolver gth_for_geometric(const SparseStochasticMatrix& m, double eps) {
    const Index n = m.size();
    std::vector<std::vector<std::pair<Index, double>>> off(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i)
        m.for_row(i, [&](Index j, double v) {
            if (j != i && v != 0.0) off[static_cast<size_t>(i)].push_back({j, (1.0 - eps) * v});
        });
    // Exact by structure: row sums of (1-eps) M equal 1-eps, so the excess is
    // eps; self loops cancel out of both the diagonal and the excess.
    Vec excess(static_cast<size_t>(n), eps);
    return GthSolver(n, off, excess);
}

inline Vec gmres_geometric(const SparseStochasticMatrix& m, const Vec& v, double eps, Side side,
                           double tol, SolveReport& report) {
    const Index n = m.size();
    auto apply = [&](const Vec& x, Vec& y) {
        detail::apply_side(m, side, x, y);
        for (Index i = 0; i < n; ++i)
            y[static_cast<size_t>(i)] =
                x[static_cast<size_t>(i)] - (1.0 - eps) * y[static_cast<size_t>(i)];
    };
    Vec b(v.size());
    for (size_t i = 0; i < v.size(); ++i) b[i] = eps * v[i];
    Vec x0 = v; // the solution is a weighted average of the M^k v, so v is a fair start
    Vec x = gmres(apply, b, std::move(x0), tol, 10 * n, std::min<Index>(n, 200), report);
    // Near-singular systems bottom out at the round-off floor; accept that.
    double floor = 64.0 * std::numeric_limits<double>::epsilon() * (2.0 * norm2(x) + norm2(b));
    if (!report.converged && report.residual > std::max(tol * norm2(b), floor))
        throw SolverDivergence("geometric solve: GMRES stalled at residual " +
                               std::to_string(report.residual));
    return x;
}

} // namespace detail

constexpr Index kDenseDirectLimit = 512;

/// Geometric mean C_eps[M] v = eps sum_k (1-eps)^k M^k v.
/// The series method truncates once the tail bound (1-eps)^K drops below tol;
/// the solve method solves (I - (1-eps) M) x = eps v. Solver choice: exact
/// elimination for small matrices (right side), Richardson while its
/// certified iteration count stays reasonable, GMRES otherwise.
inline Vec geometric_average_apply(const SparseStochasticMatrix& m, const Vec& v, double eps,
                                   GeometricMethod method = GeometricMethod::solve,
                                   double tol = 1e-12, Side side = Side::right,
                                   SolveReport* report_out = nullptr) {
    if (static_cast<Index>(v.size()) != m.size()) throw DimensionMismatch("geometric_average_apply");
    if (!(eps > 0.0 && eps <= 1.0))
        throw ValidationError("geometric_average_apply: eps must be in (0, 1]");
    SolveReport report;
    Vec out;
    if (eps == 1.0) {
        out = v;
        report = {0, 0.0, true};
    } else if (method == GeometricMethod::series) {
        const double q = 1.0 - eps;
        const long long max_terms = 100000000;
        Vec cur = v;
        Vec sum = v; // k = 0 term before the eps prefactor
        Vec next;
        double qk = 1.0;
        long long k = 1;
        for (; k < max_terms; ++k) {
            qk *= q;
            if (qk <= tol) break;
            detail::apply_side(m, side, cur, next);
            cur.swap(next);
            for (size_t i = 0; i < sum.size(); ++i) sum[i] += qk * cur[i];
        }
        if (qk > tol)
            throw SolverDivergence("geometric series: tail bound not reached within " +
                                   std::to_string(max_terms) + " terms; use the solve method");
        scale(sum, eps);
        out = std::move(sum);
        report = {static_cast<Index>(k), qk, true};
    } else if (m.size() <= kDenseDirectLimit) {
        GthSolver lu = detail::gth_for_geometric(m, eps);
        const Index n = m.size();
        if (side == Side::right) {
            Vec b(v.size());
            for (size_t i = 0; i < v.size(); ++i) b[i] = eps * v[i];
            out = lu.solve(b);
        } else {
            // x^T (I - (1-eps) M) = eps v^T via the transposed resolvent,
            // assembled column by column from the same factorization.
            out.assign(static_cast<size_t>(n), 0.0);
            Vec e(static_cast<size_t>(n), 0.0);
            for (Index j = 0; j < n; ++j) {
                e[static_cast<size_t>(j)] = eps;
                Vec col = lu.solve(e);
                e[static_cast<size_t>(j)] = 0.0;
                out[static_cast<size_t>(j)] = dot(v, col);
            }
        }
        report = {0, 0.0, true};
    } else if (eps >= 1e-3) {
        out = detail::richardson_geometric(m, v, eps, side, tol, report);
    } else {
        out = detail::gmres_geometric(m, v, eps, side, tol, report);
    }
    if (report_out) *report_out = report;
    return out;
}

/// Dense idempotent matrix; construction enforces P P = P entrywise.
class ProjectionMatrix {
public:
    static constexpr double kIdempotencyTol = 1e-8;

    explicit ProjectionMatrix(DenseMatrix values) : values_(std::move(values)) {
        if (values_.rows() != values_.cols())
            throw DimensionMismatch("ProjectionMatrix: not square");
        double dev = values_.multiply(values_).sup_distance(values_);
        if (dev > kIdempotencyTol)
            throw ValidationError("projection is not idempotent (deviation " +
                                  std::to_string(dev) + ")");
    }

    Index size() const noexcept { return values_.rows(); }
    const DenseMatrix& values() const noexcept { return values_; }
    Vec row(Index i) const {
        Vec r(static_cast<size_t>(values_.cols()));
        for (Index j = 0; j < values_.cols(); ++j) r[static_cast<size_t>(j)] = values_(i, j);
        return r;
    }

private:
    DenseMatrix values_;
};

constexpr Index kProjectionSizeGuard = 10000;

/// Numerical spectral projection onto the invariant subspace: the resolvent
/// eps(I - (1-eps) M)^{-1} at eps = eps_floor, driven to its eps -> 0 limit
/// by repeated squaring. The resolvent's non-invariant eigenvalues are of
/// size eps/gap and squaring squares them away, so the result is idempotent
/// even for chains whose spectral gap is below eps_floor. Columns come from
/// exact elimination solves, so entries stay accurate at tiny eps_floor.
inline ProjectionMatrix fixed_space_projection(const SparseStochasticMatrix& m,
                                               double eps_floor = 1e-12) {
    const Index n = m.size();
    if (n > kProjectionSizeGuard)
        throw SizeGuard("fixed_space_projection: n = " + std::to_string(n) +
                        " exceeds the dense guard of " + std::to_string(kProjectionSizeGuard));
    if (!(eps_floor > 0.0 && eps_floor < 1.0))
        throw ValidationError("fixed_space_projection: eps_floor must be in (0, 1)");
    GthSolver lu = detail::gth_for_geometric(m, eps_floor);
    DenseMatrix p(n, n);
    Vec e(static_cast<size_t>(n), 0.0);
    for (Index j = 0; j < n; ++j) {
        e[static_cast<size_t>(j)] = eps_floor;
        Vec col = lu.solve(e);
        e[static_cast<size_t>(j)] = 0.0;
        for (Index i = 0; i < n; ++i) p(i, j) = col[static_cast<size_t>(i)];
    }
    // The resolvent's non-invariant eigenvalues have modulus eps/(eps + gap);
    // squaring converges fast in the usual case and still terminates for
    // sub-eps_floor gaps, where dozens of passes may be needed.
    for (int pass = 0; pass < 48; ++pass) {
        DenseMatrix sq = p.multiply(p);
        if (sq.sup_distance(p) <= 1e-11) break;
        p = std::move(sq);
    }
    return ProjectionMatrix(std::move(p));
}

/// Left 1-eigenvector basis as probability vectors: rows of the fixed-space
/// projection, clustered by L1 distance below 10 tol.
inline std::vector<ProbabilityVector> invariant_distributions(const SparseStochasticMatrix& m,
                                                              double tol = 1e-9) {
    ProjectionMatrix p = fixed_space_projection(m);
    std::vector<Vec> reps;
    for (Index i = 0; i < p.size(); ++i) {
        Vec row = p.row(i);
        double s = 0.0;
        for (double& x : row) {
            if (x < 0.0) x = 0.0; // round-off shavings only; GTH keeps rows non-negative
            s += x;
        }
        scale(row, 1.0 / s);
        bool merged = false;
        for (const Vec& r : reps) {
            double d = 0.0;
            for (size_t k = 0; k < row.size(); ++k) d += std::fabs(row[k] - r[k]);
            if (d < 10.0 * tol) {
                merged = true;
                break;
            }
        }
        if (!merged) reps.push_back(std::move(row));
    }
    std::vector<ProbabilityVector> out;
    out.reserve(reps.size());
    for (Vec& r : reps) out.emplace_back(std::move(r));
    return out;
}

} // namespace stobas
