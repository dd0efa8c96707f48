#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/vec.hpp"

namespace stobas {

struct Triplet {
    Index row;
    Index col;
    double value;
};

/// Row-stochastic sparse matrix in CSR form. Construction validates the
/// stochastic-matrix invariants and never renormalizes silently; inputs that
/// fail them are rejected with the specific violation.
class SparseStochasticMatrix {
public:
    static constexpr double kDefaultTol = 1e-12;

    SparseStochasticMatrix(Index n, std::vector<Triplet> entries, double tol = kDefaultTol)
        : n_(n), tol_(tol) {
        if (n < 1) throw ValidationError("matrix dimension must be >= 1");
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.row, a.col) < std::tie(b.row, b.col);
        });
        row_ptr_.assign(static_cast<size_t>(n) + 1, 0);
        col_.reserve(entries.size());
        val_.reserve(entries.size());
        for (size_t k = 0; k < entries.size(); ++k) {
            const Triplet& t = entries[k];
            if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
                throw ValidationError("triplet index (" + std::to_string(t.row) + "," +
                                      std::to_string(t.col) + ") outside [0," + std::to_string(n) + ")");
            if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col)
                throw DuplicateEntry("duplicate entry at (" + std::to_string(t.row) + "," +
                                     std::to_string(t.col) + ")");
            if (t.value < 0.0 || !std::isfinite(t.value))
                throw NegativeEntry("entry at (" + std::to_string(t.row) + "," +
                                    std::to_string(t.col) + ") is " + std::to_string(t.value));
            if (t.value > 1.0 + tol)
                throw ValidationError("entry at (" + std::to_string(t.row) + "," +
                                      std::to_string(t.col) + ") exceeds 1");
            ++row_ptr_[static_cast<size_t>(t.row) + 1];
            col_.push_back(t.col);
            val_.push_back(t.value);
        }
        for (size_t i = 0; i < static_cast<size_t>(n); ++i) row_ptr_[i + 1] += row_ptr_[i];

        Index worst_row = -1;
        double worst_dev = 0.0;
        for (Index i = 0; i < n; ++i) {
            double s = 0.0;
            for (Index k = row_ptr_[static_cast<size_t>(i)]; k < row_ptr_[static_cast<size_t>(i) + 1]; ++k)
                s += val_[static_cast<size_t>(k)];
            double dev = std::fabs(s - 1.0);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst_row = i;
            }
        }
        if (worst_dev > tol) {
            std::ostringstream os;
            os << "row " << worst_row << " sums to 1 " << std::showpos << std::setprecision(3)
               << (row_sum(worst_row) - 1.0) << " (tolerance " << std::noshowpos << tol << ")";
            throw RowSumViolation(os.str());
        }
    }

    Index size() const noexcept { return n_; }
    Index nnz() const noexcept { return static_cast<Index>(val_.size()); }
    double tolerance() const noexcept { return tol_; }

    double row_sum(Index i) const {
        double s = 0.0;
        for (Index k = row_ptr_[static_cast<size_t>(i)]; k < row_ptr_[static_cast<size_t>(i) + 1]; ++k)
            s += val_[static_cast<size_t>(k)];
        return s;
    }

    /// y = M x (acts on column vectors; y_i = sum_j M_ij x_j).
    void apply_right(const Vec& x, Vec& y) const {
        if (static_cast<Index>(x.size()) != n_) throw DimensionMismatch("apply_right");
        y.assign(static_cast<size_t>(n_), 0.0);
        for (Index i = 0; i < n_; ++i) {
            double s = 0.0;
            for (Index k = row_ptr_[static_cast<size_t>(i)]; k < row_ptr_[static_cast<size_t>(i) + 1]; ++k)
                s += val_[static_cast<size_t>(k)] * x[static_cast<size_t>(col_[static_cast<size_t>(k)])];
            y[static_cast<size_t>(i)] = s;
        }
    }

    /// y^T = x^T M (distribution propagation; y_j = sum_i x_i M_ij).
    void apply_left(const Vec& x, Vec& y) const {
        if (static_cast<Index>(x.size()) != n_) throw DimensionMismatch("apply_left");
        y.assign(static_cast<size_t>(n_), 0.0);
        for (Index i = 0; i < n_; ++i) {
            double xi = x[static_cast<size_t>(i)];
            if (xi == 0.0) continue;
            for (Index k = row_ptr_[static_cast<size_t>(i)]; k < row_ptr_[static_cast<size_t>(i) + 1]; ++k)
                y[static_cast<size_t>(col_[static_cast<size_t>(k)])] += xi * val_[static_cast<size_t>(k)];
        }
    }

    Vec apply_right(const Vec& x) const {
        Vec y;
        apply_right(x, y);
        return y;
    }

    Vec apply_left(const Vec& x) const {
        Vec y;
        apply_left(x, y);
        return y;
    }

    template <typename Fn>
    void for_row(Index i, Fn&& fn) const {
        for (Index k = row_ptr_[static_cast<size_t>(i)]; k < row_ptr_[static_cast<size_t>(i) + 1]; ++k)
            fn(col_[static_cast<size_t>(k)], val_[static_cast<size_t>(k)]);
    }

    std::vector<Triplet> to_triplets() const {
        std::vector<Triplet> out;
        out.reserve(val_.size());
        for (Index i = 0; i < n_; ++i)
            for_row(i, [&](Index j, double v) { out.push_back({i, j, v}); });
        return out;
    }

private:
    Index n_;
    double tol_;
    std::vector<Index> row_ptr_;
    std::vector<Index> col_;
    std::vector<double> val_;
};

/// Validate raw triplets and build the matrix; row sums are checked, never
/// silently repaired.
inline SparseStochasticMatrix validate_stochastic(std::vector<Triplet> entries, Index n,
                                                  double tol = SparseStochasticMatrix::kDefaultTol) {
    return SparseStochasticMatrix(n, std::move(entries), tol);
}

/// Non-negative vector summing to 1 within 1e-12.
class ProbabilityVector {
public:
    static constexpr double kSumTol = 1e-12;

    explicit ProbabilityVector(Vec values) : values_(std::move(values)) {
        double s = 0.0;
        for (double v : values_) {
            if (v < 0.0 || !std::isfinite(v))
                throw ValidationError("probability vector has negative or non-finite entry");
            s += v;
        }
        if (std::fabs(s - 1.0) > kSumTol)
            throw ValidationError("probability vector sums to " + std::to_string(s));
    }

    static ProbabilityVector uniform(Index n) {
        Vec v(static_cast<size_t>(n), 1.0 / static_cast<double>(n));
        return ProbabilityVector(std::move(v));
    }

    static ProbabilityVector point_mass(Index n, Index i) {
        Vec v(static_cast<size_t>(n), 0.0);
        v[static_cast<size_t>(i)] = 1.0;
        return ProbabilityVector(std::move(v));
    }

    Index size() const noexcept { return static_cast<Index>(values_.size()); }
    const Vec& values() const noexcept { return values_; }
    double operator[](Index i) const { return values_[static_cast<size_t>(i)]; }

private:
    Vec values_;
};

/// Generalized state vector normalized so that max_i |v_i| = 1.
class StateWeightVector {
public:
    static constexpr double kNormTol = 1e-12;

    explicit StateWeightVector(Vec values) : values_(std::move(values)) {
        double m = norm_sup(values_);
        if (m == 0.0) throw WeightViolation("weight vector is identically zero");
        if (std::fabs(m - 1.0) > kNormTol)
            throw WeightViolation("weight vector max |v_i| is " + std::to_string(m) + ", expected 1");
    }

    /// Rescale an arbitrary non-zero vector to max |v_i| = 1.
    static StateWeightVector normalized(Vec values) {
        double m = norm_sup(values);
        if (m == 0.0) throw WeightViolation("weight vector is identically zero");
        for (double& v : values) v /= m;
        return StateWeightVector(std::move(values));
    }

    Index size() const noexcept { return static_cast<Index>(values_.size()); }
    const Vec& values() const noexcept { return values_; }

private:
    Vec values_;
};

// --- text formats -----------------------------------------------------------
// Matrix: first line "n nnz", then nnz lines "i j v" (0-based).
// Vector: one decimal per line.

inline void save_matrix(const SparseStochasticMatrix& m, std::ostream& os) {
    os << m.size() << ' ' << m.nnz() << '\n';
    os << std::setprecision(17);
    for (Index i = 0; i < m.size(); ++i)
        m.for_row(i, [&](Index j, double v) { os << i << ' ' << j << ' ' << v << '\n'; });
}

inline void save_matrix(const SparseStochasticMatrix& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    save_matrix(m, os);
}

inline SparseStochasticMatrix load_matrix(std::istream& is,
                                          double tol = SparseStochasticMatrix::kDefaultTol) {
    Index n = 0, nnz = 0;
    if (!(is >> n >> nnz)) throw IoError("matrix file: missing 'n nnz' header");
    std::vector<Triplet> ts;
    ts.reserve(static_cast<size_t>(nnz));
    for (Index k = 0; k < nnz; ++k) {
        Triplet t{};
        if (!(is >> t.row >> t.col >> t.value))
            throw IoError("matrix file: truncated at entry " + std::to_string(k));
        ts.push_back(t);
    }
    return SparseStochasticMatrix(n, std::move(ts), tol);
}

inline SparseStochasticMatrix load_matrix(const std::string& path,
                                          double tol = SparseStochasticMatrix::kDefaultTol) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return load_matrix(is, tol);
}

inline void save_vector(const Vec& v, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << std::setprecision(17);
    for (double x : v) os << x << '\n';
}

inline Vec load_vector(std::istream& is) {
    Vec v;
    double x;
    while (is >> x) v.push_back(x);
    return v;
}

inline Vec load_vector(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return load_vector(is);
}

} // namespace stobas
