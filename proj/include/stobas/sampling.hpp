#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stobas/dynamics.hpp"
#include "stobas/errors.hpp"
#include "stobas/parallel.hpp"
#include "stobas/region.hpp"
#include "stobas/rng.hpp"
#include "stobas/sparse.hpp"
#include "stobas/vec.hpp"

namespace stobas {

/// Distribution of the trajectory evaluation time: a constant stopping rate
/// (exponential), equidistribution on [0, T], or a fixed horizon.
struct TimeRule {
    enum class Kind { exponential, uniform, fixed };

    Kind kind = Kind::fixed;
    double rate = 0.0;    // exponential only
    double horizon = 0.0; // uniform / fixed

    static TimeRule exponential(double rate) {
        if (!(rate > 0.0)) throw ValidationError("time rule: exponential rate must be positive");
        return {Kind::exponential, rate, 0.0};
    }
    static TimeRule uniform(double horizon) {
        if (!(horizon > 0.0)) throw ValidationError("time rule: horizon must be positive");
        return {Kind::uniform, 0.0, horizon};
    }
    static TimeRule fixed(double horizon) {
        if (!(horizon > 0.0)) throw ValidationError("time rule: horizon must be positive");
        return {Kind::fixed, 0.0, horizon};
    }

    double draw(RngStream& rng) const {
        switch (kind) {
        case Kind::exponential: return rng.exponential(rate);
        case Kind::uniform: return rng.uniform() * horizon;
        default: return horizon;
        }
    }

    /// Scalar the rule is parameterized by, for table output.
    double param() const { return kind == Kind::exponential ? rate : horizon; }

    std::string label() const {
        switch (kind) {
        case Kind::exponential: return "exponential";
        case Kind::uniform: return "uniform";
        default: return "fixed";
        }
    }
};

struct GbsEstimate {
    double b_hat = 0.0;
    double stderr_ = 0.0;
    long long n_samples = 0;
    long long n_failed = 0;
    TimeRule time_rule;
    uint64_t seed = 0;
};

/// Continuous-time system under a flow map: RK4 when noise-free, otherwise
/// Euler-Maruyama with additive noise. Periodic coordinates wrap at output.
template <typename Field>
struct ContinuousSystem {
    Field field;
    Index dim = 0;
    double dt = 0.01;
    Vec sigma;
    std::vector<bool> periodic;
    Vec wrap_lo, wrap_hi;

    Vec integrate(Vec x0, double t, RngStream& rng) const {
        if (t > 0.0) {
            if (has_noise())
                x0 = euler_maruyama_integrate(field, std::move(x0), t, dt, sigma, rng);
            else
                x0 = rk4_integrate(field, std::move(x0), t, dt);
        }
        wrap(x0);
        return x0;
    }

    bool has_noise() const {
        for (double s : sigma)
            if (s > 0.0) return true;
        return false;
    }

    void wrap(Vec& x) const {
        for (size_t k = 0; k < periodic.size(); ++k) {
            if (!periodic[k]) continue;
            double lo = wrap_lo[k], span = wrap_hi[k] - lo;
            x[k] -= span * std::floor((x[k] - lo) / span);
            if (x[k] >= wrap_hi[k]) x[k] = lo;
        }
    }
};

template <typename Field>
ContinuousSystem<std::decay_t<Field>> make_continuous_system(Field&& field, Index dim,
                                                             double dt = 0.01, Vec sigma = {}) {
    return {std::forward<Field>(field), dim, dt, std::move(sigma), {}, {}, {}};
}

/// Finite Markov chain run as a unit-time-step system. Continuous evaluation
/// times are quantized by rounding down to whole steps; the 1-entry state
/// vector carries the current state index.
struct DiscreteChainSystem {
    const SparseStochasticMatrix* matrix;

    Vec integrate(Vec x0, double t, RngStream& rng) const {
        Index state = static_cast<Index>(x0[0]);
        long long steps = static_cast<long long>(std::floor(t));
        for (long long s = 0; s < steps; ++s) {
            double u = rng.uniform();
            double acc = 0.0;
            Index next = -1;
            Index last = state;
            matrix->for_row(state, [&](Index j, double v) {
                last = j;
                if (next < 0) {
                    acc += v;
                    if (u < acc) next = j;
                }
            });
            state = next >= 0 ? next : last; // next < 0 only on sub-ulp rounding of the row sum
        }
        return {static_cast<double>(state)};
    }
};

/// Initial-condition sampler drawing a state from a probability vector.
inline std::function<Vec(RngStream&)> chain_state_sampler(const ProbabilityVector& rho) {
    Vec weights = rho.values();
    return [weights](RngStream& rng) -> Vec {
        double u = rng.uniform();
        double acc = 0.0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return {static_cast<double>(i)};
        }
        return {static_cast<double>(weights.size() - 1)};
    };
}

/// Uniform product sampler on a box.
inline std::function<Vec(RngStream&)> box_sampler(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw DimensionMismatch("box_sampler");
    return [lo = std::move(lo), hi = std::move(hi)](RngStream& rng) {
        Vec x(lo.size());
        for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
        return x;
    };
}

/// Sampler adding a uniform box perturbation to a base state.
inline std::function<Vec(RngStream&)> perturbation_sampler(Vec base, Vec lo, Vec hi) {
    if (base.size() != lo.size() || lo.size() != hi.size())
        throw DimensionMismatch("perturbation_sampler");
    return [base = std::move(base), lo = std::move(lo), hi = std::move(hi)](RngStream& rng) {
        Vec x(base.size());
        for (size_t i = 0; i < x.size(); ++i) x[i] = base[i] + rng.uniform(lo[i], hi[i]);
        return x;
    };
}

/// Bernoulli experiment for generalized basin stability: draw a start from
/// the perturbation sampler, a run time from the rule, integrate, and test
/// region membership at the endpoint. Trials run in parallel on per-trial
/// random streams; results are independent of the worker count. Failed
/// integrations are excluded from the estimate and reported.
template <typename System, typename Sampler, typename RegionPred>
GbsEstimate gbs_estimate(const System& sys, Sampler&& sampler, RegionPred&& in_region,
                         const TimeRule& rule, long long n_samples, uint64_t seed,
                         int threads = 0) {
    if (n_samples < 1) throw ValidationError("gbs_estimate: need at least one sample");
    std::atomic<long long> successes{0};
    std::atomic<long long> failures{0};
    parallel_for(static_cast<Index>(n_samples), threads, [&](Index trial) {
        RngStream rng(seed, static_cast<uint64_t>(trial));
        Vec x0 = sampler(rng);
        double t = rule.draw(rng);
        try {
            Vec endpoint = sys.integrate(std::move(x0), t, rng);
            if (in_region(endpoint)) successes.fetch_add(1, std::memory_order_relaxed);
        } catch (const NumericalError&) {
            failures.fetch_add(1, std::memory_order_relaxed);
        }
    });
    GbsEstimate est;
    est.n_samples = n_samples;
    est.n_failed = failures.load();
    est.time_rule = rule;
    est.seed = seed;
    long long valid = n_samples - est.n_failed;
    if (valid > 0) {
        est.b_hat = static_cast<double>(successes.load()) / static_cast<double>(valid);
        est.stderr_ = std::sqrt(est.b_hat * (1.0 - est.b_hat) / static_cast<double>(valid));
    }
    return est;
}

struct GbsSweepCell {
    TimeRule rule;
    double sigma = 0.0;
    GbsEstimate estimate;
};

/// Cartesian sweep over time rules and noise strengths. `system_factory`
/// builds the system for a given noise strength; each cell runs with a seed
/// derived from (seed, rule index, sigma index).
template <typename SystemFactory, typename Sampler, typename RegionPred>
std::vector<GbsSweepCell> gbs_sweep(SystemFactory&& system_factory, Sampler&& sampler,
                                    RegionPred&& in_region, const std::vector<TimeRule>& rules,
                                    const std::vector<double>& sigmas, long long n_samples,
                                    uint64_t seed, int threads = 0) {
    if (rules.empty() || sigmas.empty()) throw ValidationError("gbs_sweep: empty grid");
    std::vector<GbsSweepCell> cells;
    for (size_t si = 0; si < sigmas.size(); ++si) {
        auto sys = system_factory(sigmas[si]);
        for (size_t ri = 0; ri < rules.size(); ++ri) {
            uint64_t cell_seed = detail::mix(detail::mix(seed, ri), 0x73c9u + si);
            GbsSweepCell cell;
            cell.rule = rules[ri];
            cell.sigma = sigmas[si];
            cell.estimate =
                gbs_estimate(sys, sampler, in_region, rules[ri], n_samples, cell_seed, threads);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

/// Pointwise membership probability from repeated time draws at a fixed
/// start: estimates the leaky-absorption committor (exponential rule) or the
/// finite-horizon mean sojourn time (uniform rule) at x0.
template <typename System, typename RegionPred>
GbsEstimate membership_estimate(const System& sys, const Vec& x0, RegionPred&& in_region,
                                const TimeRule& rule, long long n_repeats, uint64_t seed,
                                int threads = 0) {
    return gbs_estimate(
        sys, [&x0](RngStream&) { return x0; }, in_region, rule, n_repeats, seed, threads);
}

// --- region mini-language ------------------------------------------------------
// all-abs-lt:<coord-prefix>:<value>   every coordinate whose label starts with
//                                     the prefix satisfies |x_i| < value
// ball:<c_1>:...:<c_d>:<radius>       Euclidean ball
// box:<lo_1>:...:<lo_d>:<hi_1>:...:<hi_d>
// states:<i>,<j>,...                  box-index set (discrete chains)

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            parts.push_back(s.substr(start));
            break;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

inline Region parse_region_spec(const std::string& spec, Index dim,
                                const std::vector<std::string>& coord_labels = {}) {
    auto parts = split(spec, ':');
    const std::string& head = parts[0];
    auto num = [&](const std::string& s) {
        try {
            size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ValidationError("region spec: cannot parse number '" + s + "'");
        }
    };
    if (head == "all-abs-lt") {
        if (parts.size() != 3) throw ValidationError("region spec: all-abs-lt:<prefix>:<value>");
        std::string prefix = parts[1];
        double bound = num(parts[2]);
        std::vector<size_t> coords;
        for (size_t i = 0; i < coord_labels.size(); ++i)
            if (coord_labels[i].rfind(prefix, 0) == 0) coords.push_back(i);
        if (coords.empty())
            throw ValidationError("region spec: no coordinate labelled '" + prefix + "*'");
        std::string desc = spec;
        return Region::predicate(
            [coords, bound](const Vec& x) {
                for (size_t i : coords)
                    if (!(std::fabs(x[i]) < bound)) return false;
                return true;
            },
            desc);
    }
    if (head == "ball") {
        if (parts.size() != static_cast<size_t>(dim) + 2)
            throw ValidationError("region spec: ball needs " + std::to_string(dim) +
                                  " center coordinates and a radius");
        Vec center(static_cast<size_t>(dim));
        for (Index i = 0; i < dim; ++i) center[static_cast<size_t>(i)] = num(parts[static_cast<size_t>(i) + 1]);
        double radius = num(parts.back());
        if (!(radius > 0.0)) throw ValidationError("region spec: radius must be positive");
        return Region::predicate(
            [center, radius](const Vec& x) {
                double s = 0.0;
                for (size_t i = 0; i < center.size(); ++i) {
                    double d = x[i] - center[i];
                    s += d * d;
                }
                return s < radius * radius;
            },
            spec);
    }
    if (head == "box") {
        if (parts.size() != 2 * static_cast<size_t>(dim) + 1)
            throw ValidationError("region spec: box needs " + std::to_string(2 * dim) + " bounds");
        Vec lo(static_cast<size_t>(dim)), hi(static_cast<size_t>(dim));
        for (Index i = 0; i < dim; ++i) {
            lo[static_cast<size_t>(i)] = num(parts[static_cast<size_t>(i) + 1]);
            hi[static_cast<size_t>(i)] = num(parts[static_cast<size_t>(i) + dim + 1]);
        }
        return Region::predicate(
            [lo, hi](const Vec& x) {
                for (size_t i = 0; i < lo.size(); ++i)
                    if (x[i] < lo[i] || x[i] >= hi[i]) return false;
                return true;
            },
            spec);
    }
    if (head == "states") {
        if (parts.size() != 2) throw ValidationError("region spec: states:<i>,<j>,...");
        std::vector<Index> idx;
        for (const std::string& tok : split(parts[1], ','))
            idx.push_back(static_cast<Index>(num(tok)));
        return Region::boxes(std::move(idx));
    }
    throw ValidationError("region spec: unknown form '" + head + "'");
}

/// Membership test usable with both continuous-predicate and box-set regions
/// (the latter against 1-entry discrete states).
inline std::function<bool(const Vec&)> region_membership(Region region) {
    if (region.kind() == Region::Kind::predicate)
        return [region = std::move(region)](const Vec& x) { return region.contains(x); };
    if (region.kind() == Region::Kind::boxes) {
        std::vector<Index> idx = region.box_indices();
        return [idx](const Vec& x) {
            Index s = static_cast<Index>(x[0]);
            return std::binary_search(idx.begin(), idx.end(), s);
        };
    }
    throw ValidationError("region_membership: weight-vector regions have no membership test");
}

} // namespace stobas
