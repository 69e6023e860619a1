#pragma once

// Sample distance covariance, variance and correlation computed exactly from
// double-centered Euclidean distance matrices (O(n^2) per pair of blocks).

#include "errors.hpp"
#include "summation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace dcovsel {

/// n x k sample of one (possibly vector-valued) variable. Rows are observations.
class VariableBlock {
public:
    explicit VariableBlock(Eigen::MatrixXd values) : values_(std::move(values)) { validate(); }

    /// Univariate block from a column vector.
    explicit VariableBlock(const Eigen::VectorXd& column) : values_(column) { validate(); }

    static VariableBlock from_values(std::span<const double> column)
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(column.size()));
        for (std::size_t i = 0; i < column.size(); ++i) {
            v(static_cast<Eigen::Index>(i)) = column[i];
        }
        return VariableBlock(v);
    }

    [[nodiscard]] Eigen::Index n() const noexcept { return values_.rows(); }
    [[nodiscard]] Eigen::Index dims() const noexcept { return values_.cols(); }
    [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }

private:
    void validate() const
    {
        if (values_.rows() < 2) {
            throw DataError("variable block needs at least 2 observations, got " + std::to_string(values_.rows()));
        }
        if (values_.cols() < 1) {
            throw DataError("variable block has no columns");
        }
        if (!values_.allFinite()) {
            throw DataError("variable block contains non-finite values");
        }
    }

    Eigen::MatrixXd values_;
};

struct DCovStats {
    double v2 = 0.0;  ///< sample distance covariance V_n^2(x, y)
    double vx2 = 0.0; ///< V_n^2(x)
    double vy2 = 0.0; ///< V_n^2(y)
    double r2 = 0.0;  ///< R_n^2(x, y); 0 when vx2 * vy2 == 0
};

namespace detail {

/// Squared Euclidean distances between rows, accumulated column by column.
inline Eigen::MatrixXd squared_distances(const Eigen::Ref<const Eigen::MatrixXd>& x)
{
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto col = x.col(c);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double diff = col(i) - col(j);
                sq(i, j) += diff * diff;
            }
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j + 1; i < n; ++i) {
            sq(j, i) = sq(i, j);
        }
    }
    return sq;
}

/// Row means of a square matrix with compensated summation.
inline Eigen::VectorXd row_means(const Eigen::MatrixXd& d)
{
    const Eigen::Index n = d.rows();
    Eigen::VectorXd means(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        CompensatedSum s;
        for (Eigen::Index j = 0; j < n; ++j) {
            s += d(i, j);
        }
        means(i) = s.value() / static_cast<double>(n);
    }
    return means;
}

inline Eigen::VectorXd col_means(const Eigen::MatrixXd& d)
{
    const Eigen::Index n = d.rows();
    Eigen::VectorXd means(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        CompensatedSum s;
        for (Eigen::Index i = 0; i < n; ++i) {
            s += d(i, j);
        }
        means(j) = s.value() / static_cast<double>(n);
    }
    return means;
}

inline double mean_of(const Eigen::VectorXd& v)
{
    CompensatedSum s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s += v(i);
    }
    return s.value() / static_cast<double>(v.size());
}

} // namespace detail

/// Double-centered distance matrix A_ij = a_ij - a_i. - a_.j + a_.. with its cached means.
class CenteredDistanceMatrix {
public:
    CenteredDistanceMatrix() = default;

    CenteredDistanceMatrix(Eigen::MatrixXd entries, Eigen::VectorXd row_means, Eigen::VectorXd col_means,
                           double grand_mean)
        : entries_(std::move(entries))
        , row_means_(std::move(row_means))
        , col_means_(std::move(col_means))
        , grand_mean_(grand_mean)
    {
    }

    [[nodiscard]] Eigen::Index n() const noexcept { return entries_.rows(); }
    [[nodiscard]] const Eigen::MatrixXd& entries() const noexcept { return entries_; }
    [[nodiscard]] const Eigen::VectorXd& row_means() const noexcept { return row_means_; }
    [[nodiscard]] const Eigen::VectorXd& col_means() const noexcept { return col_means_; }
    [[nodiscard]] double grand_mean() const noexcept { return grand_mean_; }

private:
    Eigen::MatrixXd entries_;
    Eigen::VectorXd row_means_;
    Eigen::VectorXd col_means_;
    double grand_mean_ = 0.0;
};

/// Euclidean distance matrix of the rows of `block`.
inline Eigen::MatrixXd pairwise_distances(const VariableBlock& block)
{
    Eigen::MatrixXd d = detail::squared_distances(block.values());
    return d.cwiseSqrt();
}

/// Double centering without validation; `d` must be square and symmetric.
inline CenteredDistanceMatrix center_unchecked(const Eigen::MatrixXd& d)
{
    const Eigen::Index n = d.rows();
    Eigen::VectorXd rows = detail::row_means(d);
    Eigen::VectorXd cols = detail::col_means(d);
    const double grand = detail::mean_of(rows);
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i, j) = (d(i, j) - (rows(i) + cols(j))) + grand;
        }
    }
    return {std::move(a), std::move(rows), std::move(cols), grand};
}

/// Double-center a distance matrix. Rejects non-square, asymmetric, non-finite
/// or non-zero-diagonal input and n < 2.
inline CenteredDistanceMatrix double_center(const Eigen::MatrixXd& d)
{
    if (d.rows() != d.cols()) {
        throw DimensionError("distance matrix must be square");
    }
    if (d.rows() < 2) {
        throw DataError("double centering needs n >= 2");
    }
    if (!d.allFinite()) {
        throw DataError("distance matrix contains non-finite values");
    }
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (std::abs(d(i, i)) > tol) {
            throw DataError("distance matrix has a non-zero diagonal at index " + std::to_string(i));
        }
        for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
            if (std::abs(d(i, j) - d(j, i)) > tol) {
                throw DataError("distance matrix is not symmetric at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
            }
        }
    }
    return center_unchecked(d);
}

inline CenteredDistanceMatrix center_block(const VariableBlock& block)
{
    return center_unchecked(pairwise_distances(block));
}

/// (1/n^2) sum_ij A_ij B_ij, clamped at zero against round-off.
inline double dcov2(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b)
{
    if (a.n() != b.n()) {
        throw DimensionError("sample size mismatch: " + std::to_string(a.n()) + " vs " + std::to_string(b.n()));
    }
    const Eigen::Index n = a.n();
    const auto& ae = a.entries();
    const auto& be = b.entries();
    CompensatedSum total;
    for (Eigen::Index j = 0; j < n; ++j) {
        CompensatedSum col;
        for (Eigen::Index i = 0; i < n; ++i) {
            col += ae(i, j) * be(i, j);
        }
        total += col.value();
    }
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    return std::max(0.0, total.value() / nn);
}

inline double dcov2(const VariableBlock& x, const VariableBlock& y)
{
    if (x.n() != y.n()) {
        throw DimensionError("sample size mismatch: " + std::to_string(x.n()) + " vs " + std::to_string(y.n()));
    }
    return dcov2(center_block(x), center_block(y));
}

inline double dvar2(const CenteredDistanceMatrix& a) { return dcov2(a, a); }

inline double dvar2(const VariableBlock& x) { return dvar2(center_block(x)); }

/// Distance correlation from already-centered matrices.
inline DCovStats dcor2(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b)
{
    DCovStats s;
    s.v2 = dcov2(a, b);
    s.vx2 = dvar2(a);
    s.vy2 = dvar2(b);
    const double denom = s.vx2 * s.vy2;
    if (denom > 0.0) {
        s.r2 = std::clamp(s.v2 / std::sqrt(denom), 0.0, 1.0);
    }
    return s;
}

inline DCovStats dcor2(const VariableBlock& x, const VariableBlock& y)
{
    if (x.n() != y.n()) {
        throw DimensionError("sample size mismatch: " + std::to_string(x.n()) + " vs " + std::to_string(y.n()));
    }
    return dcor2(center_block(x), center_block(y));
}

/// Column-wise concatenation of blocks sharing n.
inline VariableBlock concatenate(std::span<const VariableBlock> blocks)
{
    if (blocks.empty()) {
        throw ArgumentError("cannot concatenate an empty list of blocks");
    }
    const Eigen::Index n = blocks.front().n();
    Eigen::Index cols = 0;
    for (const auto& b : blocks) {
        if (b.n() != n) {
            throw DimensionError("blocks disagree on sample size");
        }
        cols += b.dims();
    }
    Eigen::MatrixXd joined(n, cols);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        joined.middleCols(at, b.dims()) = b.values();
        at += b.dims();
    }
    return VariableBlock(std::move(joined));
}

/// V_n^2 of the concatenated selection (x_1, ..., x_k) against y.
inline double dcov2_joint(std::span<const VariableBlock> selected, const VariableBlock& y)
{
    if (selected.empty()) {
        throw ArgumentError("dcov2_joint needs at least one selected block");
    }
    return dcov2(concatenate(selected), y);
}

/// Running squared-distance matrix of a growing column selection. Adding a
/// column adds its squared coordinate differences, so evaluating a candidate
/// costs O(n^2) regardless of how many columns are already selected.
class JointDistanceAccumulator {
public:
    explicit JointDistanceAccumulator(Eigen::Index n) : squared_(Eigen::MatrixXd::Zero(n, n)) {}

    [[nodiscard]] Eigen::Index n() const noexcept { return squared_.rows(); }
    [[nodiscard]] std::size_t size() const noexcept { return columns_; }

    /// Centered distance matrix of the current selection extended by `column`
    /// (not committed).
    [[nodiscard]] CenteredDistanceMatrix centered_with(const Eigen::Ref<const Eigen::VectorXd>& column) const
    {
        return center_unchecked(extended(column).cwiseSqrt());
    }

    [[nodiscard]] CenteredDistanceMatrix centered() const { return center_unchecked(squared_.cwiseSqrt()); }

    void add(const Eigen::Ref<const Eigen::VectorXd>& column)
    {
        squared_ = extended(column);
        ++columns_;
    }

private:
    [[nodiscard]] Eigen::MatrixXd extended(const Eigen::Ref<const Eigen::VectorXd>& column) const
    {
        if (column.size() != n()) {
            throw DimensionError("column length does not match accumulator sample size");
        }
        return squared_ + detail::squared_distances(column);
    }

    Eigen::MatrixXd squared_;
    std::size_t columns_ = 0;
};

} // namespace dcovsel
