#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/sparse.hpp"
#include "stobas/vec.hpp"

namespace stobas {

/// Target set for committor-type quantities. Either a set of state (box)
/// indices, a generalized weight vector with max |v_i| = 1, or a predicate on
/// continuous states (used by the sampling module only).
class Region {
public:
    enum class Kind { boxes, weights, predicate };

    static Region boxes(std::vector<Index> idx) {
        std::sort(idx.begin(), idx.end());
        if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
            throw ValidationError("region: duplicate box index");
        if (!idx.empty() && idx.front() < 0) throw ValidationError("region: negative box index");
        Region r;
        r.kind_ = Kind::boxes;
        r.boxes_ = std::move(idx);
        return r;
    }

    static Region weights(StateWeightVector w) {
        Region r;
        r.kind_ = Kind::weights;
        r.weights_ = w.values();
        return r;
    }

    static Region predicate(std::function<bool(const Vec&)> fn, std::string description = {}) {
        Region r;
        r.kind_ = Kind::predicate;
        r.pred_ = std::move(fn);
        r.description_ = std::move(description);
        return r;
    }

    Kind kind() const noexcept { return kind_; }
    const std::vector<Index>& box_indices() const { return boxes_; }
    const Vec& weight_values() const { return weights_; }
    const std::string& description() const noexcept { return description_; }

    bool contains(const Vec& x) const {
        if (kind_ != Kind::predicate) throw ValidationError("region: not a continuous predicate");
        return pred_(x);
    }

    /// Target vector t for the linear formulations: the indicator of the box
    /// set, or the weight vector itself.
    Vec target_vector(Index n) const {
        switch (kind_) {
        case Kind::boxes: {
            if (boxes_.empty()) throw EmptyTarget("region: empty box set");
            if (boxes_.back() >= n)
                throw ValidationError("region: box index " + std::to_string(boxes_.back()) +
                                      " outside [0," + std::to_string(n) + ")");
            return indicator(n, boxes_);
        }
        case Kind::weights:
            if (static_cast<Index>(weights_.size()) != n)
                throw DimensionMismatch("region: weight vector length mismatch");
            return weights_;
        default:
            throw ValidationError("region: continuous predicate has no target vector");
        }
    }

    bool is_generalized() const noexcept { return kind_ == Kind::weights; }

private:
    Kind kind_ = Kind::boxes;
    std::vector<Index> boxes_;
    Vec weights_;
    std::function<bool(const Vec&)> pred_;
    std::string description_;
};

/// Region file: either one box index per line, or "weights n" followed by n
/// decimals (one per line).
inline Region load_region(std::istream& is) {
    std::string first;
    if (!(is >> first)) throw IoError("region file is empty");
    if (first == "weights") {
        Index n = 0;
        if (!(is >> n) || n < 1) throw IoError("region file: bad 'weights n' header");
        Vec w(static_cast<size_t>(n));
        for (Index i = 0; i < n; ++i)
            if (!(is >> w[static_cast<size_t>(i)]))
                throw IoError("region file: truncated weight vector");
        return Region::weights(StateWeightVector(std::move(w)));
    }
    std::vector<Index> idx;
    idx.push_back(static_cast<Index>(std::stoll(first)));
    long long v;
    while (is >> v) idx.push_back(static_cast<Index>(v));
    return Region::boxes(std::move(idx));
}

inline Region load_region(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return load_region(is);
}

inline void save_region(const Region& r, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    if (r.kind() == Region::Kind::boxes) {
        for (Index i : r.box_indices()) os << i << '\n';
    } else if (r.kind() == Region::Kind::weights) {
        os << "weights " << r.weight_values().size() << '\n';
        os << std::setprecision(17);
        for (double v : r.weight_values()) os << v << '\n';
    } else {
        throw IoError("cannot serialize a predicate region");
    }
}

} // namespace stobas
