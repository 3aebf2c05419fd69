#pragma once

#include "pathlasso/common.hpp"
#include "pathlasso/rng.hpp"

#include <cmath>
#include <vector>

namespace pathlasso {

enum class Activation { Tanh, Identity };

inline double apply_activation(Activation act, double x)
{
    return act == Activation::Tanh ? std::tanh(x) : x;
}

/// Derivative of the activation expressed through its own output value
/// (tanh' = 1 - tanh^2), so backprop only needs the stored layer outputs.
inline double activation_derivative_from_output(Activation act, double out)
{
    return act == Activation::Tanh ? 1.0 - out * out : 1.0;
}

/// Dense feedforward network. Layer l maps d_{l-1} inputs to d_l outputs via
/// o_l = act_l(W_l o_{l-1} + b_l); a layer without bias stores an empty
/// vector in `biases`.
struct Network {
    std::vector<Index> layer_dims;       // d_0 .. d_L
    std::vector<Matrix> weights;         // weights[l]: d_{l+1} x d_l
    std::vector<Vector> biases;          // biases[l]: d_{l+1} or empty
    std::vector<Activation> activations; // one per weight layer

    Index depth() const { return static_cast<Index>(weights.size()); }
    Index input_dim() const { return layer_dims.front(); }
    Index output_dim() const { return layer_dims.back(); }
    bool has_bias(Index layer) const { return biases[static_cast<std::size_t>(layer)].size() > 0; }

    void validate() const
    {
        check_shape(!layer_dims.empty(), "network: empty layer_dims");
        const std::size_t layers = weights.size();
        check_shape(layer_dims.size() == layers + 1, "network: layer_dims/weights disagree");
        check_shape(biases.size() == layers && activations.size() == layers,
                    "network: biases/activations count mismatch");
        for (std::size_t l = 0; l < layers; ++l) {
            check_shape(weights[l].rows() == layer_dims[l + 1] && weights[l].cols() == layer_dims[l],
                        "network: weight shape mismatch at layer " + std::to_string(l));
            check_shape(biases[l].size() == 0 || biases[l].size() == layer_dims[l + 1],
                        "network: bias length mismatch at layer " + std::to_string(l));
            if (!weights[l].allFinite() || !biases[l].allFinite())
                throw NumericError("network: non-finite parameter at layer " + std::to_string(l));
        }
    }
};

/// Glorot-style uniform initialization in [-r, r], r = sqrt(6 / (fan_in + fan_out));
/// biases start at zero.
inline Network make_network(const std::vector<Index>& dims,
                            const std::vector<Activation>& activations,
                            const std::vector<bool>& bias_flags,
                            Rng& rng)
{
    check_shape(dims.size() >= 2, "make_network: need at least two layer dims");
    const std::size_t layers = dims.size() - 1;
    check_shape(activations.size() == layers && bias_flags.size() == layers,
                "make_network: activations/bias flags must match layer count");

    Network net;
    net.layer_dims = dims;
    net.weights.reserve(layers);
    net.biases.reserve(layers);
    net.activations = activations;
    for (std::size_t l = 0; l < layers; ++l) {
        const Index rows = dims[l + 1];
        const Index cols = dims[l];
        const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Matrix w(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j)
                w(i, j) = rng.uniform(-r, r);
        net.weights.push_back(std::move(w));
        net.biases.push_back(bias_flags[l] ? Vector::Zero(rows) : Vector());
    }
    return net;
}

/// Gradient of a loss with respect to every weight and bias; shapes mirror
/// the owning network (empty bias gradient where the bias is absent).
struct Gradients {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;

    bool all_finite() const
    {
        for (const auto& g : d_weights)
            if (!g.allFinite())
                return false;
        for (const auto& g : d_biases)
            if (!g.allFinite())
                return false;
        return true;
    }
};

inline Gradients zero_gradients(const Network& net)
{
    Gradients g;
    g.d_weights.reserve(net.weights.size());
    g.d_biases.reserve(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.d_weights.emplace_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.d_biases.emplace_back(net.biases[l].size() > 0 ? Vector::Zero(net.biases[l].size()) : Vector());
    }
    return g;
}

/// All layer outputs o_0 .. o_L for one input vector.
inline std::vector<Vector> forward(const Network& net, const Vector& x)
{
    check_shape(x.size() == net.input_dim(), "forward: input length mismatch");
    if (!x.allFinite())
        throw NumericError("forward: non-finite input");
    std::vector<Vector> outputs;
    outputs.reserve(net.weights.size() + 1);
    outputs.push_back(x);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Vector v = net.weights[l] * outputs.back();
        if (net.biases[l].size() > 0)
            v += net.biases[l];
        for (Index i = 0; i < v.size(); ++i)
            v(i) = apply_activation(net.activations[l], v(i));
        outputs.push_back(std::move(v));
    }
    return outputs;
}

namespace detail {

/// Batch forward keeping all layer outputs; rows are samples.
inline std::vector<Matrix> forward_all(const Network& net, const Matrix& x)
{
    check_shape(x.cols() == net.input_dim(), "forward: input width mismatch");
    std::vector<Matrix> outputs;
    outputs.reserve(net.weights.size() + 1);
    outputs.push_back(x);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Matrix v = outputs.back() * net.weights[l].transpose();
        if (net.biases[l].size() > 0)
            v.rowwise() += net.biases[l].transpose();
        if (net.activations[l] == Activation::Tanh)
            v = v.array().tanh().matrix();
        outputs.push_back(std::move(v));
    }
    return outputs;
}

}  // namespace detail

/// Final layer outputs for a batch of inputs (rows are samples).
inline Matrix forward_batch(const Network& net, const Matrix& x)
{
    return detail::forward_all(net, x).back();
}

/// Mean over rows of the squared euclidean distance between the network
/// output and the target row.
inline double l2_loss(const Network& net, const Matrix& inputs, const Matrix& targets)
{
    check_shape(inputs.rows() == targets.rows(), "l2_loss: row count mismatch");
    check_shape(targets.cols() == net.output_dim(), "l2_loss: target width mismatch");
    const Matrix out = forward_batch(net, inputs);
    return (out - targets).squaredNorm() / static_cast<double>(inputs.rows());
}

/// Exact gradient of l2_loss with respect to every weight and bias.
inline Gradients backprop(const Network& net, const Matrix& inputs, const Matrix& targets)
{
    check_shape(inputs.rows() == targets.rows(), "backprop: row count mismatch");
    check_shape(targets.cols() == net.output_dim(), "backprop: target width mismatch");

    const std::vector<Matrix> outputs = detail::forward_all(net, inputs);
    const double n = static_cast<double>(inputs.rows());
    const std::size_t layers = net.weights.size();

    Gradients grads = zero_gradients(net);
    // delta = dLoss/d(pre-activation of layer l), for each sample row
    Matrix delta = (2.0 / n) * (outputs.back() - targets);
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& out_l = outputs[l + 1];
        if (net.activations[l] == Activation::Tanh)
            delta.array() *= 1.0 - out_l.array().square();
        grads.d_weights[l] = delta.transpose() * outputs[l];
        if (net.biases[l].size() > 0)
            grads.d_biases[l] = delta.colwise().sum().transpose();
        if (l > 0)
            delta = delta * net.weights[l];
    }
    return grads;
}

}  // namespace pathlasso
