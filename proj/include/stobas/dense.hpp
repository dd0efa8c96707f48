#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "stobas/errors.hpp"
#include "stobas/vec.hpp"

namespace stobas {

/// Minimal row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(Index rows, Index cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows * cols), fill) {}

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }

    double& operator()(Index i, Index j) { return data_[static_cast<size_t>(i * cols_ + j)]; }
    double operator()(Index i, Index j) const { return data_[static_cast<size_t>(i * cols_ + j)]; }

    const std::vector<double>& data() const noexcept { return data_; }

    Vec apply(const Vec& x) const {
        Vec y(static_cast<size_t>(rows_), 0.0);
        for (Index i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (Index j = 0; j < cols_; ++j) s += (*this)(i, j) * x[static_cast<size_t>(j)];
            y[static_cast<size_t>(i)] = s;
        }
        return y;
    }

    DenseMatrix multiply(const DenseMatrix& other) const {
        if (cols_ != other.rows_) throw DimensionMismatch("DenseMatrix::multiply: shape mismatch");
        DenseMatrix out(rows_, other.cols_);
        for (Index i = 0; i < rows_; ++i)
            for (Index k = 0; k < cols_; ++k) {
                double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (Index j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
            }
        return out;
    }

    double sup_distance(const DenseMatrix& other) const {
        double m = 0.0;
        for (size_t i = 0; i < data_.size(); ++i)
            m = std::max(m, std::fabs(data_[i] - other.data_[i]));
        return m;
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<double> data_;
};

/// Direct solver for systems A x = b where A = I - C with C entrywise
/// non-negative and row sums of C at most 1 (substochastic). The matrix is
/// passed in the (off-diagonal magnitudes, row excess) parameterization:
///   A_ij = -off_ij            (i != j, off_ij = C_ij >= 0)
///   A_ii = excess_i + sum_j off_ij,   excess_i = 1 - sum_j C_ij >= 0.
///
/// Elimination keeps that parameterization, so every update is an addition
/// of non-negative terms and the factorization is accurate entrywise even
/// when excess_i is many orders of magnitude below the off-diagonals. For a
/// non-negative right-hand side the substitution stages are subtraction-free
/// as well. This is the Grassmann-Taksar-Heyman scheme adapted to bordered
/// absorption systems.
class GthSolver {
public:
    /// off_rows[i] holds (column, magnitude) pairs with column != i; self
    /// loops must be folded into excess by the caller (they cancel exactly).
    GthSolver(Index n, const std::vector<std::vector<std::pair<Index, double>>>& off_rows,
              const Vec& excess)
        : n_(n), mag_(n, n, 0.0), excess_(excess), pivot_(static_cast<size_t>(n), 0.0) {
        if (static_cast<Index>(excess.size()) != n)
            throw DimensionMismatch("GthSolver: excess size mismatch");
        for (Index i = 0; i < n; ++i)
            for (auto [j, v] : off_rows[static_cast<size_t>(i)]) {
                if (j == i) continue;
                mag_(i, j) += v;
            }
        factor();
    }

    Index size() const noexcept { return n_; }

    /// Solve A x = b.
    Vec solve(const Vec& b) const {
        if (static_cast<Index>(b.size()) != n_) throw DimensionMismatch("GthSolver::solve");
        Vec y = b;
        // Forward: multipliers live in column k below the pivot.
        for (Index k = 0; k < n_; ++k) {
            double yk = y[static_cast<size_t>(k)];
            if (yk == 0.0) continue;
            for (Index i = k + 1; i < n_; ++i) y[static_cast<size_t>(i)] += mag_(i, k) * yk;
        }
        // Backward with the derived pivots.
        for (Index k = n_ - 1; k >= 0; --k) {
            double s = y[static_cast<size_t>(k)];
            for (Index j = k + 1; j < n_; ++j) s += mag_(k, j) * y[static_cast<size_t>(j)];
            y[static_cast<size_t>(k)] = s / pivot_[static_cast<size_t>(k)];
        }
        return y;
    }

private:
    void factor() {
        for (Index k = 0; k < n_; ++k) {
            double p = excess_[static_cast<size_t>(k)];
            for (Index j = k + 1; j < n_; ++j) p += mag_(k, j);
            if (!(p > 0.0) || !std::isfinite(p))
                throw SolverDivergence("GthSolver: zero pivot at row " + std::to_string(k) +
                                       " (system is singular)");
            pivot_[static_cast<size_t>(k)] = p;
            for (Index i = k + 1; i < n_; ++i) {
                double m = mag_(i, k) / p;
                if (m == 0.0) continue;
                mag_(i, k) = m; // store multiplier magnitude in place
                for (Index j = k + 1; j < n_; ++j) {
                    double v = mag_(k, j);
                    if (v != 0.0) mag_(i, j) += m * v;
                }
                excess_[static_cast<size_t>(i)] += m * excess_[static_cast<size_t>(k)];
            }
        }
    }

    Index n_;
    DenseMatrix mag_;
    Vec excess_;
    Vec pivot_;
};

} // namespace stobas
