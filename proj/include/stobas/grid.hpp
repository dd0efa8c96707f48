#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/vec.hpp"

namespace stobas {

constexpr Index kExteriorBox = -1;

/// Axis-aligned box partition of a rectangular region. Boxes are half-open
/// [lo, hi) per dimension with the global upper face closed, so every point
/// of the region belongs to exactly one box. Periodic dimensions wrap into
/// the fundamental domain before lookup. An optional mask (evaluated on box
/// centers) drops boxes; retained boxes get a stable compact re-indexing in
/// row-major order.
class GridPartition {
public:
    GridPartition(Vec lower, Vec upper, std::vector<Index> counts, std::vector<bool> periodic,
                  std::function<bool(const Vec&)> center_mask = nullptr,
                  std::function<bool(const Vec&)> sample_domain = nullptr)
        : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)),
          periodic_(std::move(periodic)), sample_domain_(std::move(sample_domain)) {
        const size_t d = lower_.size();
        if (d == 0 || upper_.size() != d || counts_.size() != d || periodic_.size() != d)
            throw InvalidBounds("grid: dimension mismatch between bounds, counts and flags");
        widths_.resize(d);
        Index total = 1;
        for (size_t k = 0; k < d; ++k) {
            if (!(lower_[k] < upper_[k]))
                throw InvalidBounds("grid: lower bound must be below upper bound in dimension " +
                                    std::to_string(k));
            if (counts_[k] < 1)
                throw InvalidBounds("grid: need at least one box per dimension");
            widths_[k] = (upper_[k] - lower_[k]) / static_cast<double>(counts_[k]);
            total *= counts_[k];
        }
        full_to_compact_.assign(static_cast<size_t>(total), kExteriorBox);
        if (center_mask) {
            Vec c(d);
            for (Index f = 0; f < total; ++f) {
                center_of_full(f, c);
                if (center_mask(c)) {
                    full_to_compact_[static_cast<size_t>(f)] =
                        static_cast<Index>(compact_to_full_.size());
                    compact_to_full_.push_back(f);
                }
            }
        } else {
            compact_to_full_.resize(static_cast<size_t>(total));
            for (Index f = 0; f < total; ++f) {
                full_to_compact_[static_cast<size_t>(f)] = f;
                compact_to_full_[static_cast<size_t>(f)] = f;
            }
        }
        if (compact_to_full_.empty()) throw InvalidBounds("grid: mask discards every box");
    }

    Index dim() const noexcept { return static_cast<Index>(lower_.size()); }
    Index box_count() const noexcept { return static_cast<Index>(compact_to_full_.size()); }
    const Vec& lower() const noexcept { return lower_; }
    const Vec& upper() const noexcept { return upper_; }
    const std::vector<Index>& counts() const noexcept { return counts_; }
    const std::vector<bool>& periodic() const noexcept { return periodic_; }
    const Vec& widths() const noexcept { return widths_; }
    bool has_sample_domain() const noexcept { return static_cast<bool>(sample_domain_); }
    bool in_sample_domain(const Vec& x) const { return !sample_domain_ || sample_domain_(x); }

    /// Compact index of the box containing x, or kExteriorBox.
    Index locate(const Vec& x) const {
        const size_t d = lower_.size();
        if (x.size() != d) throw DimensionMismatch("grid::locate");
        Index full = 0;
        for (size_t k = 0; k < d; ++k) {
            double v = x[k];
            if (!std::isfinite(v)) return kExteriorBox;
            if (periodic_[k]) {
                double span = upper_[k] - lower_[k];
                v -= span * std::floor((v - lower_[k]) / span);
                if (v >= upper_[k]) v = lower_[k]; // guards fp wrap landing on the seam
            } else if (v < lower_[k] || v > upper_[k]) {
                return kExteriorBox;
            }
            Index idx = static_cast<Index>(std::floor((v - lower_[k]) / widths_[k]));
            if (idx >= counts_[k]) idx = counts_[k] - 1; // closed upper face
            if (idx < 0) idx = 0;
            full = full * counts_[k] + idx;
        }
        return full_to_compact_[static_cast<size_t>(full)];
    }

    void box_coords(Index compact, std::vector<Index>& coords) const {
        Index f = compact_to_full_[static_cast<size_t>(compact)];
        const size_t d = lower_.size();
        coords.resize(d);
        for (size_t k = d; k-- > 0;) {
            coords[k] = f % counts_[k];
            f /= counts_[k];
        }
    }

    Vec box_center(Index compact) const {
        std::vector<Index> coords;
        box_coords(compact, coords);
        Vec c(lower_.size());
        for (size_t k = 0; k < c.size(); ++k)
            c[k] = lower_[k] + (static_cast<double>(coords[k]) + 0.5) * widths_[k];
        return c;
    }

    Vec box_lower(Index compact) const {
        std::vector<Index> coords;
        box_coords(compact, coords);
        Vec c(lower_.size());
        for (size_t k = 0; k < c.size(); ++k)
            c[k] = lower_[k] + static_cast<double>(coords[k]) * widths_[k];
        return c;
    }

private:
    void center_of_full(Index full, Vec& c) const {
        const size_t d = lower_.size();
        for (size_t k = d; k-- > 0;) {
            Index idx = full % counts_[k];
            full /= counts_[k];
            c[k] = lower_[k] + (static_cast<double>(idx) + 0.5) * widths_[k];
        }
    }

    Vec lower_, upper_, widths_;
    std::vector<Index> counts_;
    std::vector<bool> periodic_;
    std::function<bool(const Vec&)> sample_domain_;
    std::vector<Index> full_to_compact_;
    std::vector<Index> compact_to_full_;
};

inline GridPartition build_partition(Vec lower, Vec upper, std::vector<Index> counts,
                                     std::vector<bool> periodic,
                                     std::function<bool(const Vec&)> center_mask = nullptr,
                                     std::function<bool(const Vec&)> sample_domain = nullptr) {
    return GridPartition(std::move(lower), std::move(upper), std::move(counts),
                         std::move(periodic), std::move(center_mask), std::move(sample_domain));
}

} // namespace stobas
