#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stobas/dense.hpp"
#include "stobas/errors.hpp"
#include "stobas/markov.hpp"
#include "stobas/region.hpp"
#include "stobas/solve.hpp"
#include "stobas/sparse.hpp"
#include "stobas/vec.hpp"

namespace stobas {

struct CommittorResult {
    Vec q;
    std::optional<double> eps;
    double residual = 0.0;
    Index iterations = 0;
    /// Set for weight-vector targets; entries then carry no [0,1] guarantee.
    bool generalized = false;
};

enum class AbsorptionMethod { automatic, direct, gmres_iterative, value_iteration };

constexpr Index kAbsorptionDenseLimit = 4096;
constexpr double kValueIterationTol = 1e-12;
constexpr Index kValueIterationMaxIter = 10000000;

namespace detail {

// Minimal non-negative solution of (I - diag(1 - exit) M) q = rhs with
// exit, rhs entrywise >= 0 and rhs <= exit <= 1. States that cannot reach a
// positive-rhs state through surviving transitions are pinned to zero first;
// on the remaining states the system is non-singular and is solved directly
// (exact elimination), by GMRES for large systems, or by monotone value
// iteration from zero.
inline CommittorResult solve_absorption(const SparseStochasticMatrix& m, const Vec& exit_prob,
                                        const Vec& rhs, AbsorptionMethod method) {
    const Index n = m.size();
    // Backward reachability from the positive-rhs states along edges i -> j
    // that survive absorption (exit_i < 1).
    std::vector<std::vector<Index>> pred(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        if (exit_prob[static_cast<size_t>(i)] >= 1.0) continue;
        m.for_row(i, [&](Index j, double v) {
            if (v > 0.0 && j != i) pred[static_cast<size_t>(j)].push_back(i);
        });
    }
    std::vector<char> reach(static_cast<size_t>(n), 0);
    std::vector<Index> stack;
    for (Index i = 0; i < n; ++i)
        if (rhs[static_cast<size_t>(i)] > 0.0) {
            reach[static_cast<size_t>(i)] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        Index j = stack.back();
        stack.pop_back();
        for (Index i : pred[static_cast<size_t>(j)])
            if (!reach[static_cast<size_t>(i)]) {
                reach[static_cast<size_t>(i)] = 1;
                stack.push_back(i);
            }
    }

    // States absorbed with certainty take their value directly; this keeps
    // boundary conditions exact under every solver backend and shrinks the
    // linear system to the genuinely coupled states.
    std::vector<char> pinned(static_cast<size_t>(n), 0);
    for (Index i = 0; i < n; ++i)
        if (exit_prob[static_cast<size_t>(i)] >= 1.0) pinned[static_cast<size_t>(i)] = 1;

    std::vector<Index> to_full;
    std::vector<Index> to_sub(static_cast<size_t>(n), -1);
    for (Index i = 0; i < n; ++i)
        if (reach[static_cast<size_t>(i)] && !pinned[static_cast<size_t>(i)]) {
            to_sub[static_cast<size_t>(i)] = static_cast<Index>(to_full.size());
            to_full.push_back(i);
        }
    const Index ns = static_cast<Index>(to_full.size());

    CommittorResult result;
    result.q.assign(static_cast<size_t>(n), 0.0);
    for (Index i = 0; i < n; ++i)
        if (pinned[static_cast<size_t>(i)]) result.q[static_cast<size_t>(i)] = rhs[static_cast<size_t>(i)];
    if (ns == 0) return result;

    // Restricted scaled rows: off-diagonal (1-exit_i) M_ij for j in the
    // subsystem, the exactly-known row excess
    //   exit_i + (1-exit_i) * (mass leaving the subsystem),
    // and pinned neighbours folded into the right-hand side.
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<size_t>(ns));
    Vec excess(static_cast<size_t>(ns));
    Vec b(static_cast<size_t>(ns));
    for (Index si = 0; si < ns; ++si) {
        Index i = to_full[static_cast<size_t>(si)];
        double survive = 1.0 - exit_prob[static_cast<size_t>(i)];
        double outside = 0.0;
        double from_pinned = 0.0;
        m.for_row(i, [&](Index j, double v) {
            Index sj = to_sub[static_cast<size_t>(j)];
            if (sj < 0) {
                outside += v;
                if (pinned[static_cast<size_t>(j)]) from_pinned += v * rhs[static_cast<size_t>(j)];
            } else if (sj != si && survive > 0.0 && v > 0.0) {
                rows[static_cast<size_t>(si)].push_back({sj, survive * v});
            }
        });
        excess[static_cast<size_t>(si)] = exit_prob[static_cast<size_t>(i)] + survive * outside;
        b[static_cast<size_t>(si)] = rhs[static_cast<size_t>(i)] + survive * from_pinned;
    }

    Vec qs;
    if (method == AbsorptionMethod::automatic)
        method = ns <= kAbsorptionDenseLimit ? AbsorptionMethod::direct
                                             : AbsorptionMethod::gmres_iterative;
    // self-loop coefficient of the scaled sub-chain: C_ii = 1 - excess_i - sum_offdiag
    Vec self_loop(static_cast<size_t>(ns));
    for (Index si = 0; si < ns; ++si) {
        double offsum = 0.0;
        for (auto [sj, v] : rows[static_cast<size_t>(si)]) {
            (void)sj;
            offsum += v;
        }
        self_loop[static_cast<size_t>(si)] = 1.0 - excess[static_cast<size_t>(si)] - offsum;
    }
    switch (method) {
    case AbsorptionMethod::direct: {
        GthSolver lu(ns, rows, excess);
        qs = lu.solve(b);
        result.residual = 0.0;
        break;
    }
    case AbsorptionMethod::gmres_iterative: {
        auto apply = [&](const Vec& x, Vec& y) {
            for (Index si = 0; si < ns; ++si) {
                double s = (1.0 - self_loop[static_cast<size_t>(si)]) * x[static_cast<size_t>(si)];
                for (auto [sj, v] : rows[static_cast<size_t>(si)])
                    s -= v * x[static_cast<size_t>(sj)];
                y[static_cast<size_t>(si)] = s;
            }
        };
        SolveReport rep;
        qs = gmres(apply, b, Vec(), 1e-13, 10 * ns, std::min<Index>(ns, 200), rep);
        double floor = 64.0 * std::numeric_limits<double>::epsilon() * (2.0 * norm2(qs) + norm2(b));
        if (!rep.converged && rep.residual > std::max(1e-10 * norm2(b), floor))
            throw SolverDivergence("absorption solve: GMRES stalled at residual " +
                                   std::to_string(rep.residual));
        result.residual = rep.residual;
        result.iterations = rep.iterations;
        break;
    }
    case AbsorptionMethod::value_iteration: {
        qs.assign(static_cast<size_t>(ns), 0.0);
        Vec next(static_cast<size_t>(ns));
        Index it = 0;
        for (; it < kValueIterationMaxIter; ++it) {
            double delta = 0.0;
            for (Index si = 0; si < ns; ++si) {
                double s = b[static_cast<size_t>(si)] +
                           self_loop[static_cast<size_t>(si)] * qs[static_cast<size_t>(si)];
                for (auto [sj, v] : rows[static_cast<size_t>(si)])
                    s += v * qs[static_cast<size_t>(sj)];
                next[static_cast<size_t>(si)] = s;
                delta = std::max(delta, std::fabs(s - qs[static_cast<size_t>(si)]));
            }
            qs.swap(next);
            if (delta < kValueIterationTol) break;
        }
        if (it >= kValueIterationMaxIter)
            throw SolverDivergence("absorption value iteration: no convergence");
        result.iterations = it;
        break;
    }
    default:
        throw ValidationError("solve_absorption: unknown method");
    }

    for (Index si = 0; si < ns; ++si)
        result.q[static_cast<size_t>(to_full[static_cast<size_t>(si)])] = qs[static_cast<size_t>(si)];
    return result;
}

inline void check_box_region(const Region& r, Index n, const char* what) {
    if (r.kind() != Region::Kind::boxes)
        throw ValidationError(std::string(what) + ": expected a box-set region");
    if (r.box_indices().empty()) throw EmptyTarget(std::string(what) + ": target set is empty");
    if (r.box_indices().back() >= n)
        throw ValidationError(std::string(what) + ": box index out of range");
}

} // namespace detail

/// Fuzzy committor: absorption probability into exit channel 1 when every
/// state i exits to channel 1 with probability p1_i and to channel 2 with
/// p2_i per step. Solves (I - Mhat) q = p1 with Mhat_ij = M_ij (1 - p1_i - p2_i).
inline CommittorResult fuzzy_committor(const SparseStochasticMatrix& m, const Vec& p1, const Vec& p2,
                                       AbsorptionMethod method = AbsorptionMethod::automatic) {
    const Index n = m.size();
    if (static_cast<Index>(p1.size()) != n || static_cast<Index>(p2.size()) != n)
        throw DimensionMismatch("fuzzy_committor");
    Vec exit_prob(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double a = p1[static_cast<size_t>(i)], b = p2[static_cast<size_t>(i)];
        if (a < 0.0 || b < 0.0 || a + b > 1.0 + 1e-12)
            throw ExitProbabilityViolation("exit probabilities at state " + std::to_string(i) +
                                           " violate 0 <= p1, p2 and p1 + p2 <= 1");
        exit_prob[static_cast<size_t>(i)] = std::min(1.0, a + b);
    }
    return detail::solve_absorption(m, exit_prob, p1, method);
}

/// Absorption probability into A: minimal non-negative solution of
/// M q = q off A, q = 1 on A. States with no path to A get q = 0.
inline CommittorResult committor_to(const SparseStochasticMatrix& m, const Region& a,
                                    AbsorptionMethod method = AbsorptionMethod::automatic) {
    detail::check_box_region(a, m.size(), "committor_to");
    Vec t = a.target_vector(m.size());
    return detail::solve_absorption(m, t, t, method);
}

/// Probability of hitting A before B.
inline CommittorResult committor_between(const SparseStochasticMatrix& m, const Region& a,
                                         const Region& b,
                                         AbsorptionMethod method = AbsorptionMethod::automatic) {
    detail::check_box_region(a, m.size(), "committor_between (A)");
    detail::check_box_region(b, m.size(), "committor_between (B)");
    std::vector<Index> overlap;
    std::set_intersection(a.box_indices().begin(), a.box_indices().end(), b.box_indices().begin(),
                          b.box_indices().end(), std::back_inserter(overlap));
    if (!overlap.empty())
        throw OverlappingSets("committor_between: sets share state " + std::to_string(overlap[0]));
    Vec ta = a.target_vector(m.size());
    Vec tb = b.target_vector(m.size());
    Vec exit_prob(ta.size());
    for (size_t i = 0; i < ta.size(); ++i) exit_prob[i] = ta[i] + tb[i];
    return detail::solve_absorption(m, exit_prob, ta, method);
}

/// eps-committor: solution of (I - (1-eps) M) q = eps t. For box targets t is
/// the indicator of A; weight-vector targets are passed through unclamped and
/// the result is flagged generalized.
inline CommittorResult eps_committor(const SparseStochasticMatrix& m, const Region& target,
                                     double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw ValidationError("eps_committor: eps must be in (0, 1]");
    Vec t = target.target_vector(m.size());
    SolveReport rep;
    CommittorResult res;
    res.q = geometric_average_apply(m, t, eps, GeometricMethod::solve, 1e-12, Side::right, &rep);
    res.eps = eps;
    res.residual = rep.residual;
    res.iterations = rep.iterations;
    res.generalized = target.is_generalized();
    return res;
}

/// Truncated Neumann series eps sum_{k<K} (1-eps)^k M^k t. Serves as an
/// independent oracle for eps_committor; the truncation error is bounded by
/// (1-eps)^K.
inline Vec eps_committor_series(const SparseStochasticMatrix& m, const Region& target, double eps,
                                long long terms) {
    if (terms < 1) throw ValidationError("eps_committor_series: need at least one term");
    if (!(eps > 0.0 && eps <= 1.0))
        throw ValidationError("eps_committor_series: eps must be in (0, 1]");
    Vec t = target.target_vector(m.size());
    Vec sum = t;
    Vec cur = t;
    Vec next;
    double w = 1.0;
    for (long long k = 1; k < terms; ++k) {
        w *= 1.0 - eps;
        if (w == 0.0) break;
        m.apply_right(cur, next);
        cur.swap(next);
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += w * cur[i];
    }
    scale(sum, eps);
    return sum;
}

/// q_eps / eps: expected total time the eps-absorbed process spends in the
/// target before absorption.
inline Vec expected_time_in_target(const SparseStochasticMatrix& m, const Region& target,
                                   double eps) {
    CommittorResult res = eps_committor(m, target, eps);
    scale(res.q, 1.0 / eps);
    return res.q;
}

/// Finite-horizon expected mean sojourn time s_N per start state.
inline Vec ems_finite(const SparseStochasticMatrix& m, const Region& target, long long horizon) {
    if (horizon < 1) throw ValidationError("ems_finite: horizon must be >= 1");
    Vec t = target.target_vector(m.size());
    return cesaro_average_apply(m, t, horizon, Side::right);
}

/// eps-absorption stability b_eps = rho^T q_eps.
inline double eps_absorption_stability(const SparseStochasticMatrix& m, const Region& target,
                                       const ProbabilityVector& rho, double eps) {
    if (rho.size() != m.size()) throw DimensionMismatch("eps_absorption_stability");
    CommittorResult res = eps_committor(m, target, eps);
    return dot(rho.values(), res.q);
}

/// Per-step escape probability consistent with an observed eps-committor
/// value q on a single leaking state: p = eps (1 - q) / (q (1 - eps)).
inline double leak_rate(double q, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw DomainViolation("leak_rate: eps must be in (0, 1]");
    if (q > 1.0) throw DomainViolation("leak_rate: q exceeds 1");
    if (q < eps) throw DomainViolation("leak_rate: q < eps admits no escape probability in [0, 1]");
    if (eps == 1.0) return q < 1.0 ? 1.0 : 0.0; // q = 1 forced; boundary convention
    return eps * (1.0 - q) / (q * (1.0 - eps));
}

} // namespace stobas
