#pragma once

#include "pathlasso/network.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pathlasso {

/// Soft threshold: sign(theta) * max(|theta| - threshold, 0).
inline double prox_lasso(double theta, double threshold)
{
    const double shrunk = std::abs(theta) - threshold;
    if (shrunk <= 0.0)
        return 0.0;
    return theta < 0.0 ? -shrunk : shrunk;
}

/// Group soft threshold: every entry scaled by max(1 - threshold/||g||_2, 0).
/// A zero-norm group maps to all zeros (continuous extension of the clamp).
inline Vector prox_group_lasso(const Vector& group, double threshold)
{
    const double norm = group.norm();
    if (norm == 0.0)
        return Vector::Zero(group.size());
    const double factor = std::max(1.0 - threshold / norm, 0.0);
    return factor * group;
}

/// Product of the absolute values of the links along one path. `path` holds
/// one node index per layer, input first.
inline double path_value(const Network& net, const std::vector<Index>& path)
{
    check_shape(static_cast<Index>(path.size()) == net.depth() + 1,
                "path_value: path length must be layer count + 1");
    double value = 1.0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Matrix& w = net.weights[l];
        const Index row = path[l + 1];
        const Index col = path[l];
        check_shape(row >= 0 && row < w.rows() && col >= 0 && col < w.cols(),
                    "path_value: node index out of range at layer " + std::to_string(l));
        value *= std::abs(w(row, col));
    }
    return value;
}

/// Connection strength between every input/output node pair of a weight
/// chain: element-wise sqrt of W_L^2 * ... * W_1^2 (squares element-wise).
/// `weights` is in network order, W_1 first; the result is d_L x d_0.
inline Matrix connection_matrix(const std::vector<Matrix>& weights)
{
    check_shape(!weights.empty(), "connection_matrix: empty weight list");
    Matrix product = weights.front().cwiseProduct(weights.front());
    for (std::size_t l = 1; l < weights.size(); ++l) {
        check_shape(weights[l].cols() == product.rows(),
                    "connection_matrix: non-conformable weights at layer " + std::to_string(l));
        product = weights[l].cwiseProduct(weights[l]) * product;
    }
    return product.cwiseSqrt();
}

/// Brute-force group norm over all paths between one node pair: sqrt of the
/// sum of squared path values, enumerated explicitly. Refuses chains with
/// more than 10^6 paths.
inline double enumerate_paths_norm(const std::vector<Matrix>& weights, Index out_node, Index in_node)
{
    check_shape(!weights.empty(), "enumerate_paths_norm: empty weight list");
    check_shape(in_node >= 0 && in_node < weights.front().cols(), "enumerate_paths_norm: input index");
    check_shape(out_node >= 0 && out_node < weights.back().rows(), "enumerate_paths_norm: output index");

    const std::size_t inner = weights.size() - 1;
    double path_count = 1.0;
    for (std::size_t l = 0; l < inner; ++l)
        path_count *= static_cast<double>(weights[l].rows());
    if (path_count > 1e6)
        throw CapacityError("enumerate_paths_norm: more than 1e6 paths");

    std::vector<Index> node(inner, 0);
    double sum_sq = 0.0;
    while (true) {
        double value = 1.0;
        Index prev = in_node;
        for (std::size_t l = 0; l < inner; ++l) {
            value *= weights[l](node[l], prev);
            prev = node[l];
        }
        value *= weights.back()(out_node, prev);
        sum_sq += value * value;

        // odometer over the inner-layer indices
        std::size_t l = 0;
        for (; l < inner; ++l) {
            if (++node[l] < weights[l].rows())
                break;
            node[l] = 0;
        }
        if (l == inner)
            break;
    }
    return std::sqrt(sum_sq);
}

/// Sentinel penalty meaning "prune this connection at the first proximal step".
inline constexpr double kPruneImmediately = std::numeric_limits<double>::infinity();

/// Per-connection adaptive penalties lambda / reference^gamma; connections
/// with zero reference strength get the prune-immediately sentinel.
inline Matrix adaptive_penalties(const Matrix& reference, double lambda, double gamma)
{
    if (lambda < 0.0 || gamma <= 0.0)
        throw ConfigError("adaptive_penalties: need lambda >= 0 and gamma > 0");
    Matrix out(reference.rows(), reference.cols());
    for (Index i = 0; i < reference.rows(); ++i)
        for (Index j = 0; j < reference.cols(); ++j) {
            const double ref = reference(i, j);
            out(i, j) = ref > 0.0 ? lambda / std::pow(ref, gamma) : kPruneImmediately;
        }
    return out;
}

enum class GroupAxis { Row, Column };

/// Exclusive-lasso value over a connection matrix: sum over groups (one per
/// row or column) of the squared entry sums. Entries are non-negative, so no
/// absolute values are needed.
inline double exclusive_lasso_value(const Matrix& conn, GroupAxis axis)
{
    if (axis == GroupAxis::Row)
        return conn.rowwise().sum().squaredNorm();
    return conn.colwise().sum().squaredNorm();
}

/// Product of element-wise squared matrices, W_L^2 * ... * W_1^2 (network
/// order in, d_L x d_0 out). This is the inside of the connection matrix.
inline Matrix squared_chain_product(const std::vector<Matrix>& weights)
{
    check_shape(!weights.empty(), "squared_chain_product: empty weight list");
    Matrix product = weights.front().cwiseProduct(weights.front());
    for (std::size_t l = 1; l < weights.size(); ++l) {
        check_shape(weights[l].cols() == product.rows(), "squared_chain_product: non-conformable");
        product = weights[l].cwiseProduct(weights[l]) * product;
    }
    return product;
}

/// Gradient of <upstream, W_L^2 * ... * W_1^2> with respect to each W_l:
/// d/dW_l = 2 W_l o (prefix^T * upstream * suffix^T), where prefix/suffix are
/// the squared-chain products above/below layer l.
inline std::vector<Matrix> squared_chain_backward(const std::vector<Matrix>& weights,
                                                  const Matrix& upstream)
{
    const std::size_t layers = weights.size();
    std::vector<Matrix> squared(layers);
    for (std::size_t l = 0; l < layers; ++l)
        squared[l] = weights[l].cwiseProduct(weights[l]);

    // suffix[l] = squared[l-1] * ... * squared[0] (identity at l = 0)
    std::vector<Matrix> suffix(layers + 1);
    suffix[0] = Matrix::Identity(weights.front().cols(), weights.front().cols());
    for (std::size_t l = 0; l < layers; ++l)
        suffix[l + 1] = squared[l] * suffix[l];
    check_shape(upstream.rows() == suffix[layers].rows() && upstream.cols() == suffix[layers].cols(),
                "squared_chain_backward: upstream shape mismatch");

    std::vector<Matrix> grads(layers);
    Matrix prefix = Matrix::Identity(weights.back().rows(), weights.back().rows());
    for (std::size_t l = layers; l-- > 0;) {
        grads[l] = 2.0 * weights[l].cwiseProduct(prefix.transpose() * upstream * suffix[l].transpose());
        prefix = prefix * squared[l];
    }
    return grads;
}

/// Back-propagates a gradient on C = sqrt(S) to S: upstream / (2 C), with the
/// sub-gradient at C = 0 taken as 0 so pruned connections stay pruned.
inline Matrix sqrt_backward(const Matrix& conn, const Matrix& upstream)
{
    check_shape(conn.rows() == upstream.rows() && conn.cols() == upstream.cols(),
                "sqrt_backward: shape mismatch");
    Matrix out = Matrix::Zero(conn.rows(), conn.cols());
    for (Index i = 0; i < conn.rows(); ++i)
        for (Index j = 0; j < conn.cols(); ++j)
            if (conn(i, j) > 0.0)
                out(i, j) = upstream(i, j) / (2.0 * conn(i, j));
    return out;
}

/// Gradient of the exclusive-lasso value with respect to the connection
/// matrix entries: 2 * (group sum) for every entry of the group.
inline Matrix exclusive_lasso_conn_gradient(const Matrix& conn, GroupAxis axis)
{
    Matrix out(conn.rows(), conn.cols());
    if (axis == GroupAxis::Row) {
        const Vector sums = conn.rowwise().sum();
        for (Index i = 0; i < conn.rows(); ++i)
            out.row(i).setConstant(2.0 * sums(i));
    } else {
        const Vector sums = conn.colwise().sum().transpose();
        for (Index j = 0; j < conn.cols(); ++j)
            out.col(j).setConstant(2.0 * sums(j));
    }
    return out;
}

struct PenaltyGradient {
    double value = 0.0;
    std::vector<Matrix> d_weights;
};

/// Exclusive-lasso penalty of a single weight chain's connection matrix,
/// with its gradient chained through the element-wise square root and the
/// squared-matrix product back to every W_l.
inline PenaltyGradient exclusive_lasso_penalty(const std::vector<Matrix>& weights, GroupAxis axis)
{
    const Matrix conn = connection_matrix(weights);
    PenaltyGradient res;
    res.value = exclusive_lasso_value(conn, axis);
    const Matrix d_conn = exclusive_lasso_conn_gradient(conn, axis);
    res.d_weights = squared_chain_backward(weights, sqrt_backward(conn, d_conn));
    return res;
}

}  // namespace pathlasso
