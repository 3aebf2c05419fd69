#pragma once

#include "pathlasso/common.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace pathlasso {

struct MetricReport {
    double r2 = 0.0;
    double obs_match = 0.0;
    std::optional<double> label_match;
    std::optional<double> knn_match;
    int knn_k = 0;
    long connections = 0;
};

/// Explained variance: 1 - sum ||x^_i - x_i||^2 / sum ||x_i - mean||^2 with
/// the per-column mean of the originals. Negative for worse-than-mean
/// reconstructions; undefined (throws) when the originals have no variance.
inline double r_squared(const Matrix& original, const Matrix& reconstructed)
{
    check_shape(original.rows() == reconstructed.rows() && original.cols() == reconstructed.cols(),
                "r_squared: shape mismatch");
    const Vector mean = original.colwise().mean();
    const double total = (original.rowwise() - mean.transpose()).squaredNorm();
    if (total == 0.0)
        throw MetricError("r_squared: originals have zero total variance");
    return 1.0 - (reconstructed - original).squaredNorm() / total;
}

namespace detail {

inline Vector distances_to_originals(const Matrix& original, const Vector& point)
{
    return (original.rowwise() - point.transpose()).rowwise().norm();
}

}  // namespace detail

/// Fraction of reconstructions strictly closer to their own original than to
/// any other original; ties count as failures.
inline double observation_match(const Matrix& original, const Matrix& reconstructed)
{
    check_shape(original.rows() == reconstructed.rows(), "observation_match: row count mismatch");
    check_shape(original.cols() == reconstructed.cols(), "observation_match: width mismatch");
    const Index n = original.rows();
    long hits = 0;
    for (Index i = 0; i < n; ++i) {
        const Vector dist = detail::distances_to_originals(original, reconstructed.row(i).transpose());
        bool strict = true;
        for (Index j = 0; j < n && strict; ++j)
            if (j != i && dist(j) <= dist(i))
                strict = false;
        if (strict)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// Fraction of rows whose nearest original (ties broken by lowest index; the
/// own row may win) carries the same label.
inline double label_match(const Matrix& original, const Matrix& reconstructed,
                          const std::vector<int>& labels)
{
    check_shape(original.rows() == reconstructed.rows(), "label_match: row count mismatch");
    check_shape(static_cast<Index>(labels.size()) == original.rows(),
                "label_match: one label per row required");
    const Index n = original.rows();
    long hits = 0;
    for (Index i = 0; i < n; ++i) {
        const Vector dist = detail::distances_to_originals(original, reconstructed.row(i).transpose());
        Index nearest = 0;
        for (Index j = 1; j < n; ++j)
            if (dist(j) < dist(nearest))
                nearest = j;
        if (labels[static_cast<std::size_t>(nearest)] == labels[static_cast<std::size_t>(i)])
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// Fraction of rows whose own original is among the k nearest originals to
/// the reconstruction (distance ties broken by lowest index).
inline double knn_match(const Matrix& original, const Matrix& reconstructed, int k)
{
    check_shape(original.rows() == reconstructed.rows(), "knn_match: row count mismatch");
    const Index n = original.rows();
    if (k < 1 || k >= n)
        throw ConfigError("knn_match: need 1 <= k < n");
    long hits = 0;
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Vector dist = detail::distances_to_originals(original, reconstructed.row(i).transpose());
        for (Index j = 0; j < n; ++j)
            order[static_cast<std::size_t>(j)] = j;
        std::sort(order.begin(), order.end(), [&dist](Index a, Index b) {
            return dist(a) != dist(b) ? dist(a) < dist(b) : a < b;
        });
        for (int r = 0; r < k; ++r)
            if (order[static_cast<std::size_t>(r)] == i) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// Number of connection-matrix entries above the tolerance.
inline long count_connections(const Matrix& conn, double tol = 1e-12)
{
    if (tol < 0.0)
        throw ConfigError("count_connections: tolerance must be non-negative");
    long count = 0;
    for (Index i = 0; i < conn.rows(); ++i)
        for (Index j = 0; j < conn.cols(); ++j)
            if (conn(i, j) > tol)
                ++count;
    return count;
}

}  // namespace pathlasso
