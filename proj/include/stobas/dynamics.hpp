#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/rng.hpp"
#include "stobas/sparse.hpp"
#include "stobas/vec.hpp"

namespace stobas {

// --- vector fields -----------------------------------------------------------

struct PendulumParams {
    double alpha = 0.1;    // damping
    double coupling = 1.0; // K
    double drive = 0.5;    // P
};

/// Damped driven pendulum, state (phi, omega).
inline void pendulum_field(const PendulumParams& p, const Vec& x, Vec& dx) {
    dx.resize(2);
    dx[0] = x[1];
    dx[1] = -p.alpha * x[1] + p.drive - p.coupling * std::sin(x[0]);
}

inline Vec pendulum_fixed_point(const PendulumParams& p) {
    return {std::asin(p.drive / p.coupling), 0.0};
}

struct ChainParams {
    Index n = 16;
    double alpha = 0.1;
    double coupling = 8.0; // K
    double drive = 1.0;    // |P_i|
    /// Per-node drive signs; defaults to the alternating +,-,+,- pattern
    /// (net drive zero, so a synchronous fixed point exists).
    std::vector<double> drive_signs;

    double drive_at(Index i) const {
        if (!drive_signs.empty()) return drive * drive_signs[static_cast<size_t>(i)];
        return drive * (i % 2 == 0 ? 1.0 : -1.0);
    }
};

/// Open chain of coupled damped driven pendula; state (phi_0..phi_{n-1},
/// omega_0..omega_{n-1}).
inline void chain_field(const ChainParams& p, const Vec& x, Vec& dx) {
    const Index n = p.n;
    dx.resize(static_cast<size_t>(2 * n));
    for (Index i = 0; i < n; ++i) {
        double phi = x[static_cast<size_t>(i)];
        double omega = x[static_cast<size_t>(n + i)];
        double coupling = 0.0;
        if (i > 0) coupling += std::sin(phi - x[static_cast<size_t>(i - 1)]);
        if (i < n - 1) coupling += std::sin(phi - x[static_cast<size_t>(i + 1)]);
        dx[static_cast<size_t>(i)] = omega;
        dx[static_cast<size_t>(n + i)] = -p.alpha * omega + p.drive_at(i) - p.coupling * coupling;
    }
}

/// Synchronous fixed point of the open chain: the power balance is a chain of
/// edge-flow equations whose solution is a prefix-sum of the drives,
/// phi_i - phi_{i+1} = asin(s_i / K) with s_i = sum_{j<=i} P_j.
inline Vec chain_sync_state(const ChainParams& p) {
    const Index n = p.n;
    if (n < 2) throw ValidationError("chain_sync_state: need at least two oscillators");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += p.drive_at(i);
    if (std::fabs(total) > 1e-12)
        throw ValidationError("chain_sync_state: drives do not balance (sum " +
                              std::to_string(total) + ")");
    Vec x(static_cast<size_t>(2 * n), 0.0);
    double prefix = 0.0;
    for (Index i = 0; i + 1 < n; ++i) {
        prefix += p.drive_at(i);
        if (std::fabs(prefix) > p.coupling)
            throw ValidationError("chain_sync_state: edge flow " + std::to_string(prefix) +
                                  " exceeds coupling capacity");
        x[static_cast<size_t>(i + 1)] = x[static_cast<size_t>(i)] - std::asin(prefix / p.coupling);
    }
    return x;
}

struct AnderiesParams {
    double alpha_m = 0.05;
    double alpha = 0.1;
    double beta = 1.0;
    /// Net ecosystem production as a function of (c_a, c_t). The published
    /// closed form is not part of this library; callers must supply one.
    std::function<double(double, double)> nep;
};

/// Illustrative stand-in production term: grows with atmospheric carbon,
/// vanishes without vegetation, saturates at high terrestrial stock. Gives a
/// single interior attractor and a slow recovery region near c_t = 0. Not a
/// published parameterization.
inline std::function<double(double, double)> standin_nep(double rate = 1.0, double cap = 0.8) {
    return [rate, cap](double ca, double ct) { return rate * ca * ct * (1.0 - ct / cap); };
}

/// Carbon cycle model, state (c_m, c_t); c_a = 1 - c_m - c_t is eliminated,
/// so total carbon is conserved identically.
inline void anderies_field(const AnderiesParams& p, const Vec& x, Vec& dx) {
    if (!p.nep) throw ValidationError("anderies_field: no NEP callback supplied");
    double cm = x[0], ct = x[1];
    double ca = 1.0 - cm - ct;
    dx.resize(2);
    dx[0] = p.alpha_m * (ca - p.beta * cm);
    dx[1] = p.nep(ca, ct) - p.alpha * ct;
}

// --- conceptual box models ----------------------------------------------------

enum class BoxModel { metastable, transient };

/// The two conceptual chains: a 2-state metastable pair and a 3-state chain
/// with an absorbing attractor fed by two transient states.
inline SparseStochasticMatrix box_model_matrix(BoxModel model, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw InvalidDelta("box_model_matrix: delta must be in (0, 1)");
    double d2 = delta * delta;
    if (model == BoxModel::metastable) {
        std::vector<Triplet> t = {{0, 0, 1.0 - d2}, {0, 1, d2}, {1, 0, delta}, {1, 1, 1.0 - delta}};
        return SparseStochasticMatrix(2, std::move(t));
    }
    std::vector<Triplet> t = {{0, 0, 1.0 - d2},   {0, 2, d2}, {1, 1, 1.0 - delta},
                              {1, 2, delta},      {2, 2, 1.0}};
    return SparseStochasticMatrix(3, std::move(t));
}

// --- flow maps ----------------------------------------------------------------

/// A system plus integration parameters defining the time-tau flow map.
struct FlowMapSpec {
    std::function<void(const Vec&, Vec&)> field;
    Index dim = 0;
    double tau = 1.0;
    double dt = 0.01;
    Vec sigma;                   // per-coordinate noise strength; empty = none
    std::vector<bool> periodic;  // coordinates wrapped at output
    Vec wrap_lo, wrap_hi;

    void validate() const {
        if (dim < 1) throw ValidationError("flow map: dimension must be >= 1");
        if (!(dt > 0.0)) throw ValidationError("flow map: dt must be positive");
        if (tau < dt) throw ValidationError("flow map: tau must be at least dt");
        for (double s : sigma)
            if (s < 0.0) throw ValidationError("flow map: noise strength must be >= 0");
    }

    bool has_noise() const {
        for (double s : sigma)
            if (s > 0.0) return true;
        return false;
    }
};

namespace detail {

inline long long step_count(double tau, double dt) {
    long long n = static_cast<long long>(std::ceil(tau / dt - 1e-9));
    return n < 1 ? 1 : n;
}

template <typename Field>
void rk4_step(Field&& f, Vec& x, double h, Vec& k1, Vec& k2, Vec& k3, Vec& k4, Vec& tmp) {
    const size_t d = x.size();
    f(x, k1);
    tmp.resize(d);
    for (size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    for (size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    for (size_t i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
    f(tmp, k4);
    for (size_t i = 0; i < d; ++i)
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

} // namespace detail

/// Classical fixed-step RK4 over ceil(tau/dt) steps, final partial step
/// shortened. No wrapping is applied here.
template <typename Field>
Vec rk4_integrate(Field&& f, Vec x, double tau, double dt) {
    const long long n = detail::step_count(tau, dt);
    Vec k1, k2, k3, k4, tmp;
    for (long long s = 0; s < n; ++s) {
        double h = (s == n - 1) ? tau - static_cast<double>(n - 1) * dt : dt;
        detail::rk4_step(f, x, h, k1, k2, k3, k4, tmp);
        if ((s & 63) == 63 && !all_finite(x))
            throw NonFiniteState("rk4_integrate: state diverged at step " + std::to_string(s));
    }
    if (!all_finite(x)) throw NonFiniteState("rk4_integrate: non-finite endpoint");
    return x;
}

/// Euler-Maruyama with additive noise on the coordinates where sigma is
/// positive; sigma = 0 reduces exactly to the explicit Euler scheme.
template <typename Field>
Vec euler_maruyama_integrate(Field&& f, Vec x, double tau, double dt, const Vec& sigma,
                             RngStream& rng) {
    const long long n = detail::step_count(tau, dt);
    const size_t d = x.size();
    Vec dx;
    for (long long s = 0; s < n; ++s) {
        double h = (s == n - 1) ? tau - static_cast<double>(n - 1) * dt : dt;
        f(x, dx);
        for (size_t i = 0; i < d; ++i) x[i] += h * dx[i];
        if (!sigma.empty()) {
            double sq = std::sqrt(h);
            for (size_t i = 0; i < d; ++i)
                if (sigma[i] > 0.0) x[i] += sigma[i] * sq * rng.normal();
        }
        if ((s & 63) == 63 && !all_finite(x))
            throw NonFiniteState("euler_maruyama_integrate: state diverged at step " +
                                 std::to_string(s));
    }
    if (!all_finite(x)) throw NonFiniteState("euler_maruyama_integrate: non-finite endpoint");
    return x;
}

inline void wrap_periodic(const FlowMapSpec& spec, Vec& x) {
    for (size_t k = 0; k < spec.periodic.size(); ++k) {
        if (!spec.periodic[k]) continue;
        double lo = spec.wrap_lo[k], span = spec.wrap_hi[k] - lo;
        x[k] -= span * std::floor((x[k] - lo) / span);
        if (x[k] >= spec.wrap_hi[k]) x[k] = lo;
    }
}

/// Deterministic flow map phi(tau, x0); requires sigma = 0. Periodic
/// coordinates are wrapped at output only.
inline Vec integrate_deterministic(const FlowMapSpec& spec, Vec x0) {
    spec.validate();
    if (spec.has_noise())
        throw ValidationError("integrate_deterministic: spec carries non-zero noise");
    Vec x = rk4_integrate(spec.field, std::move(x0), spec.tau, spec.dt);
    wrap_periodic(spec, x);
    return x;
}

/// Stochastic flow map sample; the caller supplies the noise stream so that
/// parallel samplers stay reproducible.
inline Vec integrate_stochastic(const FlowMapSpec& spec, Vec x0, RngStream& rng) {
    spec.validate();
    Vec x = euler_maruyama_integrate(spec.field, std::move(x0), spec.tau, spec.dt, spec.sigma, rng);
    wrap_periodic(spec, x);
    return x;
}

/// One flow-map application: RK4 for noise-free flow maps, Euler-Maruyama
/// otherwise.
inline Vec flow_map_apply(const FlowMapSpec& spec, Vec x0, RngStream& rng) {
    if (spec.has_noise()) return integrate_stochastic(spec, std::move(x0), rng);
    return integrate_deterministic(spec, std::move(x0));
}

/// Noise vector acting on the frequency block of the chain state.
inline Vec chain_frequency_sigma(Index n, double sigma) {
    Vec s(static_cast<size_t>(2 * n), 0.0);
    for (Index i = 0; i < n; ++i) s[static_cast<size_t>(n + i)] = sigma;
    return s;
}

} // namespace stobas
