#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "stobas/dynamics.hpp"
#include "stobas/errors.hpp"
#include "stobas/grid.hpp"
#include "stobas/parallel.hpp"
#include "stobas/rng.hpp"
#include "stobas/sparse.hpp"

namespace stobas {

enum class ExteriorPolicy { absorb, renormalize };

struct UlamBuildReport {
    Index box_count = 0;        // retained partition elements
    Index matrix_size = 0;      // box_count, plus one if an exterior state was added
    Index samples_per_box = 0;
    double exterior_mass = 0.0; // fraction of all samples that left the partition
    uint64_t seed = 0;
    bool exterior_state_added = false;
};

namespace detail {

constexpr uint64_t kLhsPermTag = 0x9d7f3a2c00000000ULL;

// Latin-hypercube stratification per axis: sample k lands in stratum perm[k].
// Marginals are exactly uniform, and integer-slope 1-d test maps distribute
// strata between destination boxes without sampling noise.
inline std::vector<std::vector<uint32_t>> lhs_permutations(uint64_t seed, Index box, Index dim,
                                                           Index samples) {
    std::vector<std::vector<uint32_t>> perms(static_cast<size_t>(dim));
    for (Index d = 0; d < dim; ++d) {
        auto& p = perms[static_cast<size_t>(d)];
        p.resize(static_cast<size_t>(samples));
        std::iota(p.begin(), p.end(), 0u);
        RngStream rng(seed, static_cast<uint64_t>(box), kLhsPermTag + static_cast<uint64_t>(d));
        for (Index k = samples - 1; k > 0; --k)
            std::swap(p[static_cast<size_t>(k)], p[rng.uniform_index(static_cast<uint64_t>(k) + 1)]);
    }
    return perms;
}

} // namespace detail

/// Monte-Carlo Ulam estimate of the transition matrix of `flow` over the
/// partition. Every retained box gets samples_per_box start points with a
/// per-(seed, box, sample) random stream, so the result is bitwise independent
/// of the number of worker threads. Rows are exact count ratios. Samples that
/// land outside the partition either feed an appended absorbing state or are
/// dropped with row renormalization; their total mass is reported either way.
template <typename FlowFn>
    requires std::is_invocable_v<FlowFn&, const Vec&, RngStream&>
std::pair<SparseStochasticMatrix, UlamBuildReport>
estimate_transition_matrix(const GridPartition& partition, FlowFn&& flow, Index samples_per_box,
                           uint64_t seed, ExteriorPolicy policy = ExteriorPolicy::absorb,
                           int threads = 0) {
    if (samples_per_box < 1)
        throw ValidationError("estimate_transition_matrix: samples_per_box must be >= 1");
    const Index n_boxes = partition.box_count();
    const Index dim = partition.dim();
    const Index S = samples_per_box;

    struct RowCounts {
        std::vector<std::pair<Index, Index>> dest; // (box, count), exterior as kExteriorBox
    };
    std::vector<RowCounts> rows(static_cast<size_t>(n_boxes));

    parallel_for(n_boxes, threads, [&](Index box) {
        Vec lo = partition.box_lower(box);
        const Vec& w = partition.widths();
        const bool reject = partition.has_sample_domain();
        std::vector<std::vector<uint32_t>> perms;
        if (!reject) perms = detail::lhs_permutations(seed, box, dim, S);

        std::vector<Index> dests(static_cast<size_t>(S));
        Vec x(static_cast<size_t>(dim));
        for (Index k = 0; k < S; ++k) {
            RngStream rng(seed, static_cast<uint64_t>(box), static_cast<uint64_t>(k));
            if (reject) {
                // Plain uniform rejection against the continuous domain; the
                // strata of a masked box can miss the domain entirely.
                Index attempts = 0;
                do {
                    for (Index d = 0; d < dim; ++d)
                        x[static_cast<size_t>(d)] =
                            lo[static_cast<size_t>(d)] + rng.uniform() * w[static_cast<size_t>(d)];
                    if (++attempts > 100000)
                        throw IntegrationFailure(
                            "estimate_transition_matrix: box " + std::to_string(box) +
                            " has (nearly) empty intersection with the sample domain");
                } while (!partition.in_sample_domain(x));
            } else {
                for (Index d = 0; d < dim; ++d) {
                    double stratum = static_cast<double>(
                        perms[static_cast<size_t>(d)][static_cast<size_t>(k)]);
                    x[static_cast<size_t>(d)] =
                        lo[static_cast<size_t>(d)] +
                        (stratum + rng.uniform()) / static_cast<double>(S) * w[static_cast<size_t>(d)];
                }
            }
            Vec y;
            try {
                y = flow(x, rng);
            } catch (const NonFiniteState& e) {
                throw IntegrationFailure("estimate_transition_matrix: flow diverged from box " +
                                         std::to_string(box) + ": " + e.what());
            }
            dests[static_cast<size_t>(k)] = partition.locate(y);
        }
        std::sort(dests.begin(), dests.end());
        auto& out = rows[static_cast<size_t>(box)].dest;
        for (size_t i = 0; i < dests.size();) {
            size_t j = i;
            while (j < dests.size() && dests[j] == dests[i]) ++j;
            out.push_back({dests[i], static_cast<Index>(j - i)});
            i = j;
        }
    });

    long long exterior_total = 0;
    for (const auto& r : rows)
        for (auto [d, c] : r.dest)
            if (d == kExteriorBox) exterior_total += c;

    UlamBuildReport report;
    report.box_count = n_boxes;
    report.samples_per_box = S;
    report.seed = seed;
    report.exterior_mass =
        static_cast<double>(exterior_total) / (static_cast<double>(n_boxes) * static_cast<double>(S));
    report.exterior_state_added = policy == ExteriorPolicy::absorb && exterior_total > 0;

    const Index n_states = n_boxes + (report.exterior_state_added ? 1 : 0);
    report.matrix_size = n_states;

    std::vector<Triplet> triplets;
    for (Index box = 0; box < n_boxes; ++box) {
        const auto& dest = rows[static_cast<size_t>(box)].dest;
        if (policy == ExteriorPolicy::absorb) {
            for (auto [d, c] : dest) {
                Index col = d == kExteriorBox ? n_boxes : d;
                triplets.push_back({box, col, static_cast<double>(c) / static_cast<double>(S)});
            }
        } else {
            Index kept = S;
            for (auto [d, c] : dest)
                if (d == kExteriorBox) kept -= c;
            if (kept == 0)
                throw EmptyRow("estimate_transition_matrix: every sample of box " +
                               std::to_string(box) + " left the partition");
            for (auto [d, c] : dest)
                if (d != kExteriorBox)
                    triplets.push_back({box, d, static_cast<double>(c) / static_cast<double>(kept)});
        }
    }
    if (report.exterior_state_added) triplets.push_back({n_boxes, n_boxes, 1.0});

    // Count ratios per row sum to S/S; allow only for the rounding of c/S.
    SparseStochasticMatrix m(n_states, std::move(triplets), 1e-12);
    return {std::move(m), report};
}

inline std::pair<SparseStochasticMatrix, UlamBuildReport>
estimate_transition_matrix(const GridPartition& partition, const FlowMapSpec& spec,
                           Index samples_per_box, uint64_t seed,
                           ExteriorPolicy policy = ExteriorPolicy::absorb, int threads = 0) {
    spec.validate();
    if (spec.dim != partition.dim())
        throw DimensionMismatch("estimate_transition_matrix: flow and partition dimensions differ");
    auto flow = [&spec](const Vec& x, RngStream& rng) { return flow_map_apply(spec, x, rng); };
    return estimate_transition_matrix(partition, flow, samples_per_box, seed, policy, threads);
}

/// Plain key=value sidecar describing how a transition matrix was built.
inline void write_ulam_metadata(const std::string& path, const GridPartition& partition,
                                const FlowMapSpec& spec, const UlamBuildReport& report,
                                const std::string& system_name) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << std::setprecision(17);
    auto join = [](const auto& v) {
        std::ostringstream ss;
        ss << std::setprecision(17);
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) ss << ',';
            ss << v[i];
        }
        return ss.str();
    };
    os << "system=" << system_name << '\n';
    os << "dim=" << partition.dim() << '\n';
    os << "lower=" << join(partition.lower()) << '\n';
    os << "upper=" << join(partition.upper()) << '\n';
    os << "counts=" << join(partition.counts()) << '\n';
    std::string flags;
    for (size_t i = 0; i < partition.periodic().size(); ++i) {
        if (i) flags += ',';
        flags += partition.periodic()[i] ? '1' : '0';
    }
    os << "periodic=" << flags << '\n';
    os << "tau=" << spec.tau << '\n';
    os << "dt=" << spec.dt << '\n';
    os << "sigma=" << (spec.sigma.empty() ? std::string("0") : join(spec.sigma)) << '\n';
    os << "seed=" << report.seed << '\n';
    os << "samples_per_box=" << report.samples_per_box << '\n';
    os << "box_count=" << report.box_count << '\n';
    os << "matrix_size=" << report.matrix_size << '\n';
    os << "exterior_mass=" << report.exterior_mass << '\n';
    os << "exterior_state=" << (report.exterior_state_added ? std::to_string(report.box_count)
                                                            : std::string("none"))
       << '\n';
}

} // namespace stobas
