#pragma once

#include "pathlasso/network.hpp"

#include <cmath>

namespace pathlasso {

enum class OptimizerKind { Adam, PlainSgd };

/// Optimizer state for one network. PlainSgd is a bare theta -= lr * g step
/// (the form proximal stages need); Adam keeps the usual bias-corrected
/// first/second moment accumulators.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::PlainSgd;
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Matrix> m_weights, v_weights;  // present iff kind == Adam
    std::vector<Vector> m_biases, v_biases;
};

inline OptimizerState make_plain_sgd(double learning_rate)
{
    if (learning_rate <= 0.0)
        throw ConfigError("optimizer: learning rate must be positive");
    OptimizerState s;
    s.kind = OptimizerKind::PlainSgd;
    s.learning_rate = learning_rate;
    return s;
}

inline OptimizerState make_adam(const Network& net, double learning_rate)
{
    if (learning_rate <= 0.0)
        throw ConfigError("optimizer: learning rate must be positive");
    OptimizerState s;
    s.kind = OptimizerKind::Adam;
    s.learning_rate = learning_rate;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        s.m_weights.emplace_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.v_weights.emplace_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.m_biases.emplace_back(net.biases[l].size() > 0 ? Vector::Zero(net.biases[l].size()) : Vector());
        s.v_biases.emplace_back(net.biases[l].size() > 0 ? Vector::Zero(net.biases[l].size()) : Vector());
    }
    return s;
}

namespace detail {

template <typename Param>
void adam_update(Param& theta, const Param& grad, Param& m, Param& v, const OptimizerState& s,
                 double bias1, double bias2)
{
    m = s.beta1 * m + (1.0 - s.beta1) * grad;
    v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    const Param m_hat = m / bias1;
    const Param v_hat = v / bias2;
    theta -= s.learning_rate
        * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + s.epsilon).matrix());
}

}  // namespace detail

/// One optimizer step in place. Throws NumericError on non-finite gradients.
inline void optimizer_step(Network& net, const Gradients& grads, OptimizerState& state)
{
    check_shape(grads.d_weights.size() == net.weights.size(), "optimizer_step: gradient layer count");
    if (!grads.all_finite())
        throw NumericError("optimizer_step: non-finite gradient");

    if (state.kind == OptimizerKind::PlainSgd) {
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            net.weights[l] -= state.learning_rate * grads.d_weights[l];
            if (net.biases[l].size() > 0)
                net.biases[l] -= state.learning_rate * grads.d_biases[l];
        }
        ++state.step_count;
        return;
    }

    ++state.step_count;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        detail::adam_update(net.weights[l], grads.d_weights[l], state.m_weights[l],
                            state.v_weights[l], state, bias1, bias2);
        if (net.biases[l].size() > 0)
            detail::adam_update(net.biases[l], grads.d_biases[l], state.m_biases[l],
                                state.v_biases[l], state, bias1, bias2);
    }
}

}  // namespace pathlasso
