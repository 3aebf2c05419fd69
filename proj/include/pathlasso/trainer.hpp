#pragma once

#include "pathlasso/factorization.hpp"
#include "pathlasso/network.hpp"
#include "pathlasso/optimizer.hpp"
#include "pathlasso/penalties.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace pathlasso {

/// Autoencoder architecture: encoder d_x -> ... -> d_z, decoder mirrors it.
/// Hidden layers use tanh; the latent and output layers are linear.
struct AutoencoderSpec {
    std::vector<Index> encoder_dims;       // d_x, hidden..., d_z
    std::vector<Index> decoder_dims;       // d_z, hidden..., d_x
    std::vector<bool> encoder_bias;
    std::vector<bool> decoder_bias;

    static AutoencoderSpec symmetric(const std::vector<Index>& encoder_dims, bool bias = true)
    {
        AutoencoderSpec spec;
        spec.encoder_dims = encoder_dims;
        spec.decoder_dims.assign(encoder_dims.rbegin(), encoder_dims.rend());
        spec.encoder_bias.assign(encoder_dims.size() - 1, bias);
        spec.decoder_bias.assign(encoder_dims.size() - 1, bias);
        return spec;
    }

    Index input_dim() const { return encoder_dims.front(); }
    Index latent_dim() const { return encoder_dims.back(); }

    void validate() const
    {
        check_shape(encoder_dims.size() >= 2 && decoder_dims.size() >= 2,
                    "autoencoder: encoder and decoder need at least one layer");
        check_shape(encoder_dims.back() == decoder_dims.front(),
                    "autoencoder: encoder output must match decoder input");
        check_shape(encoder_dims.front() == decoder_dims.back(),
                    "autoencoder: encoder input must match decoder output");
        check_shape(encoder_bias.size() == encoder_dims.size() - 1
                        && decoder_bias.size() == decoder_dims.size() - 1,
                    "autoencoder: bias flag count mismatch");
    }
};

/// Encoder and decoder stacked into one network (training works on the
/// stack); `encoder_layers` marks where the encoder ends.
struct Autoencoder {
    Network net;
    Index encoder_layers = 0;

    Index input_dim() const { return net.input_dim(); }
    Index latent_dim() const { return net.layer_dims[static_cast<std::size_t>(encoder_layers)]; }

    std::vector<Matrix> encoder_weights() const
    {
        return {net.weights.begin(), net.weights.begin() + encoder_layers};
    }
    std::vector<Matrix> decoder_weights() const
    {
        return {net.weights.begin() + encoder_layers, net.weights.end()};
    }

    Network encoder() const { return slice(0, encoder_layers); }
    Network decoder() const { return slice(encoder_layers, net.depth()); }

    Matrix latent(const Matrix& x) const { return forward_batch(encoder(), x); }
    Matrix reconstruct(const Matrix& x) const { return forward_batch(net, x); }

private:
    Network slice(Index first, Index last) const
    {
        Network part;
        part.layer_dims.assign(net.layer_dims.begin() + first, net.layer_dims.begin() + last + 1);
        part.weights.assign(net.weights.begin() + first, net.weights.begin() + last);
        part.biases.assign(net.biases.begin() + first, net.biases.begin() + last);
        part.activations.assign(net.activations.begin() + first, net.activations.begin() + last);
        return part;
    }
};

inline Autoencoder make_autoencoder(const AutoencoderSpec& spec, Rng& rng)
{
    spec.validate();
    Autoencoder ae;
    ae.encoder_layers = static_cast<Index>(spec.encoder_dims.size()) - 1;

    std::vector<Index> dims = spec.encoder_dims;
    dims.insert(dims.end(), spec.decoder_dims.begin() + 1, spec.decoder_dims.end());
    std::vector<Activation> acts;
    std::vector<bool> bias;
    for (std::size_t l = 0; l + 1 < spec.encoder_dims.size(); ++l) {
        acts.push_back(l + 2 < spec.encoder_dims.size() ? Activation::Tanh : Activation::Identity);
        bias.push_back(spec.encoder_bias[l]);
    }
    for (std::size_t l = 0; l + 1 < spec.decoder_dims.size(); ++l) {
        acts.push_back(l + 2 < spec.decoder_dims.size() ? Activation::Tanh : Activation::Identity);
        bias.push_back(spec.decoder_bias[l]);
    }
    ae.net = make_network(dims, acts, bias, rng);
    return ae;
}

inline Autoencoder make_autoencoder(const Network& encoder, const Network& decoder)
{
    check_shape(encoder.output_dim() == decoder.input_dim()
                    && encoder.input_dim() == decoder.output_dim(),
                "autoencoder: encoder/decoder dims do not close");
    Autoencoder ae;
    ae.encoder_layers = encoder.depth();
    ae.net = encoder;
    ae.net.layer_dims.insert(ae.net.layer_dims.end(), decoder.layer_dims.begin() + 1,
                             decoder.layer_dims.end());
    ae.net.weights.insert(ae.net.weights.end(), decoder.weights.begin(), decoder.weights.end());
    ae.net.biases.insert(ae.net.biases.end(), decoder.biases.begin(), decoder.biases.end());
    ae.net.activations.insert(ae.net.activations.end(), decoder.activations.begin(),
                              decoder.activations.end());
    return ae;
}

/// Symmetric path-lasso matrix of an autoencoder (d_z x d_x):
/// sqrt(prod (W^E)^2 + (prod (W^D)^2)^T), so one group holds all encoder
/// paths x_i -> z_j together with all decoder paths z_j -> x^_i.
inline Matrix symmetric_connection_matrix(const std::vector<Matrix>& encoder_weights,
                                          const std::vector<Matrix>& decoder_weights)
{
    const Matrix enc = squared_chain_product(encoder_weights);
    const Matrix dec = squared_chain_product(decoder_weights);
    check_shape(enc.rows() == dec.cols() && enc.cols() == dec.rows(),
                "symmetric_connection_matrix: encoder/decoder shapes do not mirror");
    return (enc + dec.transpose()).cwiseSqrt();
}

/// Penalty value plus its gradient with respect to the stacked weights.
struct SymmetricPenalty {
    double value = 0.0;
    std::vector<Matrix> d_encoder;
    std::vector<Matrix> d_decoder;
};

/// lambda-free sum of the symmetric connection matrix entries, the smooth
/// surrogate used by the substitution stage.
inline SymmetricPenalty wpl_sum_penalty(const std::vector<Matrix>& encoder_weights,
                                        const std::vector<Matrix>& decoder_weights)
{
    const Matrix conn = symmetric_connection_matrix(encoder_weights, decoder_weights);
    SymmetricPenalty pen;
    pen.value = conn.sum();
    const Matrix d_inner = sqrt_backward(conn, Matrix::Ones(conn.rows(), conn.cols()));
    pen.d_encoder = squared_chain_backward(encoder_weights, d_inner);
    pen.d_decoder = squared_chain_backward(decoder_weights, d_inner.transpose());
    return pen;
}

/// Exclusive-lasso term over the symmetric connection matrix with one group
/// per latent dimension (rows of the d_z x d_x matrix).
inline SymmetricPenalty symmetric_exclusive_penalty(const std::vector<Matrix>& encoder_weights,
                                                    const std::vector<Matrix>& decoder_weights)
{
    const Matrix conn = symmetric_connection_matrix(encoder_weights, decoder_weights);
    SymmetricPenalty pen;
    pen.value = exclusive_lasso_value(conn, GroupAxis::Row);
    const Matrix d_inner = sqrt_backward(conn, exclusive_lasso_conn_gradient(conn, GroupAxis::Row));
    pen.d_encoder = squared_chain_backward(encoder_weights, d_inner);
    pen.d_decoder = squared_chain_backward(decoder_weights, d_inner.transpose());
    return pen;
}

struct TrainConfig {
    double lambda = 0.0;
    double gamma = 2.0;
    double exclusive_weight = -1.0;  // < 0 means the default 0.1 * lambda
    int max_epochs = 2000;           // per stage
    int patience = 20;               // evaluations without improvement
    double min_improvement = 1e-5;
    int eval_every = 1;              // epochs between validation evaluations
    double adam_lr = 1e-3;
    double prox_lr = 1e-2;
    int batch_size = 0;              // 0 = full batch
    int lr_decays = 0;               // reduce-on-plateau rounds in smooth stages
    double lr_decay = 0.5;           // learning-rate factor per round
    std::uint64_t seed = 1;
    bool substitution_stage = true;
    bool boolean_threshold = false;
    std::vector<std::vector<Index>> factor_splits;  // per layer dim; empty = no split
    int factor_max_sweeps = 200;
    double factor_tolerance = 1e-6;
    double prune_tolerance = 1e-12;

    // test/diagnostic hook, called after every epoch of every stage
    std::function<void(const std::string& stage, int epoch, const Autoencoder&)> observer;

    double exclusive() const { return exclusive_weight < 0.0 ? 0.1 * lambda : exclusive_weight; }
};

struct StageCurve {
    std::string name;
    std::vector<double> train_objective;
    std::vector<double> val_objective;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<StageCurve> stages;
    Matrix connection;  // final symmetric connection matrix, d_z x d_x
    long connections = 0;
    std::vector<Matrix> encoder_mask;  // 1 = link frozen at zero
    std::vector<Matrix> decoder_mask;
    double total_seconds = 0.0;
};

/// Forces masked entries to zero; masks shaped like the weights, empty list
/// is a no-op.
inline void freeze_mask_apply(Network& net, const std::vector<Matrix>& masks)
{
    if (masks.empty())
        return;
    check_shape(masks.size() == net.weights.size(), "freeze_mask_apply: mask layer count");
    for (std::size_t l = 0; l < masks.size(); ++l) {
        check_shape(masks[l].rows() == net.weights[l].rows()
                        && masks[l].cols() == net.weights[l].cols(),
                    "freeze_mask_apply: mask shape mismatch at layer " + std::to_string(l));
        net.weights[l] = (masks[l].array() != 0.0).select(0.0, net.weights[l]);
    }
}

namespace detail {

struct SmoothPenaltySpec {
    double wpl_weight = 0.0;        // weight on sum of symmetric W_PL entries
    double exclusive_weight = 0.0;  // weight on the exclusive-lasso term
    double l1_weight = 0.0;         // parameter-wise lasso on all weights
};

/// Penalty value at the current weights; gradients are accumulated in place.
inline double accumulate_penalties(const Autoencoder& ae, const SmoothPenaltySpec& pen,
                                   Gradients& grads)
{
    double value = 0.0;
    const bool needs_chain = pen.wpl_weight != 0.0 || pen.exclusive_weight != 0.0;
    if (needs_chain) {
        const std::vector<Matrix> enc = ae.encoder_weights();
        const std::vector<Matrix> dec = ae.decoder_weights();
        if (pen.wpl_weight != 0.0) {
            const SymmetricPenalty p = wpl_sum_penalty(enc, dec);
            value += pen.wpl_weight * p.value;
            for (std::size_t l = 0; l < enc.size(); ++l)
                grads.d_weights[l] += pen.wpl_weight * p.d_encoder[l];
            for (std::size_t l = 0; l < dec.size(); ++l)
                grads.d_weights[enc.size() + l] += pen.wpl_weight * p.d_decoder[l];
        }
        if (pen.exclusive_weight != 0.0) {
            const SymmetricPenalty p = symmetric_exclusive_penalty(enc, dec);
            value += pen.exclusive_weight * p.value;
            for (std::size_t l = 0; l < enc.size(); ++l)
                grads.d_weights[l] += pen.exclusive_weight * p.d_encoder[l];
            for (std::size_t l = 0; l < dec.size(); ++l)
                grads.d_weights[enc.size() + l] += pen.exclusive_weight * p.d_decoder[l];
        }
    }
    if (pen.l1_weight != 0.0) {
        for (std::size_t l = 0; l < ae.net.weights.size(); ++l) {
            value += pen.l1_weight * ae.net.weights[l].cwiseAbs().sum();
            grads.d_weights[l] += pen.l1_weight
                * ae.net.weights[l].unaryExpr([](double v) {
                      return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                  });
        }
    }
    return value;
}

inline double penalty_value(const Autoencoder& ae, const SmoothPenaltySpec& pen)
{
    double value = 0.0;
    if (pen.wpl_weight != 0.0 || pen.exclusive_weight != 0.0) {
        const std::vector<Matrix> enc = ae.encoder_weights();
        const std::vector<Matrix> dec = ae.decoder_weights();
        const Matrix conn = symmetric_connection_matrix(enc, dec);
        if (pen.wpl_weight != 0.0)
            value += pen.wpl_weight * conn.sum();
        if (pen.exclusive_weight != 0.0)
            value += pen.exclusive_weight * exclusive_lasso_value(conn, GroupAxis::Row);
    }
    if (pen.l1_weight != 0.0)
        for (const Matrix& w : ae.net.weights)
            value += pen.l1_weight * w.cwiseAbs().sum();
    return value;
}

struct StageSettings {
    std::string name;
    bool restore_best = true;
};

/// Adam training loop with early stopping on the validation objective
/// (reconstruction loss plus the stage's penalties). When cfg.lr_decays is
/// set, an exhausted patience first restarts from the best weights at a
/// reduced learning rate before the stage gives up. The autoencoder holds
/// the best-validation weights on exit unless restore_best is off.
inline StageCurve run_smooth_stage(Autoencoder& ae, const Matrix& train, const Matrix& val,
                                   const TrainConfig& cfg, const SmoothPenaltySpec& pen,
                                   const std::vector<Matrix>& masks, const StageSettings& settings,
                                   Rng& rng)
{
    const auto started = std::chrono::steady_clock::now();
    StageCurve curve;
    curve.name = settings.name;

    OptimizerState opt = make_adam(ae.net, cfg.adam_lr);
    freeze_mask_apply(ae.net, masks);

    Network best = ae.net;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    int decays_left = cfg.lr_decays;

    std::vector<Index> order(static_cast<std::size_t>(train.rows()));
    std::iota(order.begin(), order.end(), Index{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double train_obj = 0.0;
        if (cfg.batch_size > 0 && cfg.batch_size < train.rows()) {
            rng.shuffle(order);
            for (Index start = 0; start < train.rows(); start += cfg.batch_size) {
                const Index count = std::min<Index>(cfg.batch_size, train.rows() - start);
                Matrix batch(count, train.cols());
                for (Index i = 0; i < count; ++i)
                    batch.row(i) = train.row(order[static_cast<std::size_t>(start + i)]);
                Gradients grads = backprop(ae.net, batch, batch);
                accumulate_penalties(ae, pen, grads);
                optimizer_step(ae.net, grads, opt);
                freeze_mask_apply(ae.net, masks);
            }
            train_obj = l2_loss(ae.net, train, train) + penalty_value(ae, pen);
        } else {
            Gradients grads = backprop(ae.net, train, train);
            const double pen_value = accumulate_penalties(ae, pen, grads);
            train_obj = l2_loss(ae.net, train, train) + pen_value;
            optimizer_step(ae.net, grads, opt);
            freeze_mask_apply(ae.net, masks);
        }
        if (!std::isfinite(train_obj))
            throw TrainError("stage " + settings.name + ": non-finite training loss at epoch "
                             + std::to_string(epoch));
        curve.train_objective.push_back(train_obj);

        if (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.max_epochs) {
            const double val_obj = l2_loss(ae.net, val, val) + penalty_value(ae, pen);
            curve.val_objective.push_back(val_obj);
            if (val_obj < best_val - cfg.min_improvement) {
                best_val = val_obj;
                best = ae.net;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                if (decays_left > 0) {
                    --decays_left;
                    since_best = 0;
                    ae.net = best;
                    opt = make_adam(ae.net, opt.learning_rate * cfg.lr_decay);
                } else {
                    if (cfg.observer)
                        cfg.observer(settings.name, epoch, ae);
                    break;
                }
            }
        }
        if (cfg.observer)
            cfg.observer(settings.name, epoch, ae);
    }
    if (settings.restore_best && best_val < std::numeric_limits<double>::infinity())
        ae.net = best;
    curve.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return curve;
}

}  // namespace detail

/// One proximal path-lasso optimization step:
///  1. plain gradient step on the reconstruction loss (plus the exclusive
///     term when configured),
///  2. symmetric connection matrix and group shrink factors
///     max(1 - threshold/conn, 0) from the post-gradient weights,
///  3. penalized path matrices for both sides (decoder uses the transposed
///     factors),
///  4. bounded factorization of each side seeded with the post-gradient
///     absolute weights,
///  5. signs restored from the pre-factorization weights.
/// `thresholds` is d_z x d_x and already contains alpha * lambda_ji
/// (+infinity = prune now). `frozen` lists links held at zero through the
/// gradient step; their zero seeds keep them at zero through the
/// factorization as well.
inline void proximal_path_step(Autoencoder& ae, const Matrix& batch, const TrainConfig& cfg,
                               const Matrix& thresholds,
                               const std::vector<Matrix>& frozen = {})
{
    check_shape(thresholds.rows() == ae.latent_dim() && thresholds.cols() == ae.input_dim(),
                "proximal_path_step: thresholds must be d_z x d_x");

    // 1. smooth step
    Gradients grads = backprop(ae.net, batch, batch);
    detail::SmoothPenaltySpec pen;
    pen.exclusive_weight = cfg.exclusive();
    detail::accumulate_penalties(ae, pen, grads);
    OptimizerState sgd = make_plain_sgd(cfg.prox_lr);
    optimizer_step(ae.net, grads, sgd);
    freeze_mask_apply(ae.net, frozen);

    const std::vector<Matrix> enc = ae.encoder_weights();
    const std::vector<Matrix> dec = ae.decoder_weights();

    // 2. group shrink factors
    const Matrix conn = symmetric_connection_matrix(enc, dec);
    Matrix factor(conn.rows(), conn.cols());
    for (Index i = 0; i < conn.rows(); ++i)
        for (Index j = 0; j < conn.cols(); ++j) {
            const double t = thresholds(i, j);
            if (t < 0.0)
                throw ConfigError("proximal_path_step: negative threshold");
            factor(i, j) = (conn(i, j) > 0.0 && std::isfinite(t))
                ? std::max(1.0 - t / conn(i, j), 0.0)
                : 0.0;
        }

    // 3.-5. factor each side and restore signs; cfg.factor_splits is indexed
    // by encoder layer dimension, the decoder mirrors it
    auto shrink_side = [&](const std::vector<Matrix>& side, const Matrix& side_factor,
                           std::size_t weight_offset, bool mirrored) {
        Matrix abs_chain = side.front().cwiseAbs();
        for (std::size_t l = 1; l < side.size(); ++l)
            abs_chain = side[l].cwiseAbs() * abs_chain;

        FactorizationProblem prob;
        prob.target = abs_chain.cwiseProduct(side_factor);
        prob.seeds.reserve(side.size());
        for (auto it = side.rbegin(); it != side.rend(); ++it)
            prob.seeds.push_back(it->cwiseAbs());
        prob.max_sweeps = cfg.factor_max_sweeps;
        prob.tolerance = cfg.factor_tolerance;

        std::vector<std::vector<Index>> splits = cfg.factor_splits;
        if (mirrored && !splits.empty())
            std::reverse(splits.begin(), splits.end());

        FactorizationResult res;
        try {
            res = splits.empty() ? solve(prob) : block_solve(prob, splits);
        } catch (const NumericError& err) {
            throw TrainError(std::string("proximal step: factorization failed: ") + err.what());
        }
        if (!res.converged && cfg.boolean_threshold) {
            const Matrix pattern = prob.target.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
            res.factors = boolean_threshold(res, pattern).factors;
        }

        // res.factors runs output side first; weights run input side first
        for (std::size_t l = 0; l < side.size(); ++l) {
            const Matrix& shrunk = res.factors[side.size() - 1 - l];
            Matrix& w = ae.net.weights[weight_offset + l];
            w = w.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); })
                    .cwiseProduct(shrunk);
        }
    };
    shrink_side(enc, factor, 0, false);
    shrink_side(dec, factor.transpose(), enc.size(), true);
}

struct TrainedAutoencoder {
    Autoencoder model;
    TrainReport report;
};

/// Adam on reconstruction plus lambda * sum(W_PL) plus the exclusive term:
/// the smooth surrogate stage that drives weak connections near (not exactly)
/// zero before the proximal stage.
inline StageCurve substitution_stage(Autoencoder& ae, const Matrix& train, const Matrix& val,
                                     const TrainConfig& cfg)
{
    detail::SmoothPenaltySpec pen;
    pen.wpl_weight = cfg.lambda;
    pen.exclusive_weight = cfg.exclusive();
    Rng rng(Rng::derive(cfg.seed, 101));
    return detail::run_smooth_stage(ae, train, val, cfg, pen, {}, {"substitution", true}, rng);
}

namespace detail {

/// Breaks every path between the two nodes of one weight chain exactly, by
/// zeroing the smallest link of each still-alive path, and marks every zero
/// link on those paths as frozen. All path values are already below the prune
/// tolerance when this runs, so the smallest link of a surviving path is tiny
/// and zeroing it barely moves any other connection.
inline void kill_connection_paths(Network& net, std::vector<Matrix>& frozen, Index first_layer,
                                  Index layer_count, Index out_node, Index in_node)
{
    std::vector<Index> inner(static_cast<std::size_t>(layer_count) - 1, 0);
    while (true) {
        // node sequence of this path: in_node, inner..., out_node
        Index smallest_layer = -1;
        double smallest = std::numeric_limits<double>::infinity();
        bool broken = false;
        Index prev = in_node;
        for (Index l = 0; l < layer_count; ++l) {
            const Index row = l + 1 < layer_count ? inner[static_cast<std::size_t>(l)] : out_node;
            const double w = net.weights[static_cast<std::size_t>(first_layer + l)](row, prev);
            if (w == 0.0) {
                frozen[static_cast<std::size_t>(first_layer + l)](row, prev) = 1.0;
                broken = true;
            } else if (std::abs(w) < smallest) {
                smallest = std::abs(w);
                smallest_layer = l;
            }
            prev = row;
        }
        if (!broken) {
            const Index l = smallest_layer;
            const Index row = l + 1 < layer_count ? inner[static_cast<std::size_t>(l)] : out_node;
            Index col = in_node;
            if (l > 0)
                col = inner[static_cast<std::size_t>(l - 1)];
            net.weights[static_cast<std::size_t>(first_layer + l)](row, col) = 0.0;
            frozen[static_cast<std::size_t>(first_layer + l)](row, col) = 1.0;
        }

        std::size_t d = 0;
        for (; d < inner.size(); ++d) {
            const Index dim = net.weights[static_cast<std::size_t>(first_layer + d)].rows();
            if (++inner[d] < dim)
                break;
            inner[d] = 0;
        }
        if (d == inner.size())
            break;
    }
}

/// The proximal loop of stage two. Validation is monitored on the composite
/// objective (reconstruction plus the adaptive group penalty and exclusive
/// term); weights are never restored from snapshots here since that could
/// resurrect pruned connections.
inline StageCurve run_proximal_stage(Autoencoder& ae, const Matrix& train, const Matrix& val,
                                     const TrainConfig& cfg, const Matrix& penalties,
                                     const Matrix& thresholds, Rng& rng)
{
    const auto started = std::chrono::steady_clock::now();
    StageCurve curve;
    curve.name = "proximal";

    const auto composite = [&](const Matrix& x) {
        double value = l2_loss(ae.net, x, x);
        const Matrix conn =
            symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
        for (Index i = 0; i < conn.rows(); ++i)
            for (Index j = 0; j < conn.cols(); ++j)
                if (conn(i, j) > 0.0)
                    value += penalties(i, j) * conn(i, j);
        if (cfg.exclusive() != 0.0)
            value += cfg.exclusive() * exclusive_lasso_value(conn, GroupAxis::Row);
        return value;
    };

    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<Index> order(static_cast<std::size_t>(train.rows()));
    std::iota(order.begin(), order.end(), Index{0});

    // Pruned connections stay pruned: once an entry of the symmetric matrix
    // drops below the prune tolerance, the remaining life of each of its
    // paths is ended exactly (smallest link zeroed), the dead links are
    // frozen through future gradient steps, and its threshold becomes the
    // prune sentinel.
    Matrix live_thresholds = thresholds;
    std::vector<Matrix> frozen;
    frozen.reserve(ae.net.weights.size());
    for (const Matrix& w : ae.net.weights)
        frozen.push_back(Matrix::Zero(w.rows(), w.cols()));
    Matrix pruned = Matrix::Zero(thresholds.rows(), thresholds.cols());

    const auto enforce_pruning = [&]() {
        const Matrix conn =
            symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
        const Index enc_layers = ae.encoder_layers;
        const Index dec_layers = ae.net.depth() - enc_layers;
        for (Index j = 0; j < conn.rows(); ++j)
            for (Index i = 0; i < conn.cols(); ++i) {
                if (pruned(j, i) != 0.0 || conn(j, i) >= cfg.prune_tolerance)
                    continue;
                pruned(j, i) = 1.0;
                live_thresholds(j, i) = kPruneImmediately;
                detail::kill_connection_paths(ae.net, frozen, 0, enc_layers, j, i);
                detail::kill_connection_paths(ae.net, frozen, enc_layers, dec_layers, i, j);
            }
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.batch_size > 0 && cfg.batch_size < train.rows()) {
            rng.shuffle(order);
            for (Index start = 0; start < train.rows(); start += cfg.batch_size) {
                const Index count = std::min<Index>(cfg.batch_size, train.rows() - start);
                Matrix batch(count, train.cols());
                for (Index i = 0; i < count; ++i)
                    batch.row(i) = train.row(order[static_cast<std::size_t>(start + i)]);
                proximal_path_step(ae, batch, cfg, live_thresholds, frozen);
                enforce_pruning();
            }
        } else {
            proximal_path_step(ae, train, cfg, live_thresholds, frozen);
            enforce_pruning();
        }
        const double train_obj = composite(train);
        if (!std::isfinite(train_obj))
            throw TrainError("stage proximal: non-finite training loss at epoch "
                             + std::to_string(epoch));
        curve.train_objective.push_back(train_obj);

        if (epoch % cfg.eval_every == 0 || epoch + 1 == cfg.max_epochs) {
            const double val_obj = composite(val);
            curve.val_objective.push_back(val_obj);
            if (val_obj < best_val - cfg.min_improvement) {
                best_val = val_obj;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                if (cfg.observer)
                    cfg.observer("proximal", epoch, ae);
                break;
            }
        }
        if (cfg.observer)
            cfg.observer("proximal", epoch, ae);
    }
    curve.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return curve;
}

}  // namespace detail

/// Three-stage schedule:
///   1.  Adam on the reconstruction loss (plus exclusive term),
///   1b. optional substitution stage on the smooth W_PL surrogate,
///   2.  proximal path-lasso steps with adaptive per-connection penalties
///       lambda / reference^gamma frozen from the previous stage,
///   3.  Adam fine-tuning with every link that stage two zeroed frozen at
///       zero.
/// Stages warm-start from their predecessor. With lambda = 0 only stage one
/// runs; nothing is pruned.
inline TrainedAutoencoder train_three_stage(const Matrix& train, const Matrix& val,
                                            const AutoencoderSpec& spec, const TrainConfig& cfg)
{
    spec.validate();
    check_shape(train.cols() == spec.input_dim() && val.cols() == spec.input_dim(),
                "train: data width must match the autoencoder input");
    if (cfg.lambda < 0.0 || cfg.gamma <= 0.0 || cfg.max_epochs <= 0)
        throw ConfigError("train: need lambda >= 0, gamma > 0, epochs > 0");
    const auto started = std::chrono::steady_clock::now();

    Rng init_rng(cfg.seed);
    TrainedAutoencoder out;
    out.model = make_autoencoder(spec, init_rng);
    Autoencoder& ae = out.model;

    {
        detail::SmoothPenaltySpec pen;
        pen.exclusive_weight = cfg.exclusive();
        Rng rng(Rng::derive(cfg.seed, 100));
        out.report.stages.push_back(
            detail::run_smooth_stage(ae, train, val, cfg, pen, {}, {"smooth", true}, rng));
    }

    if (cfg.lambda > 0.0) {
        if (cfg.substitution_stage)
            out.report.stages.push_back(substitution_stage(ae, train, val, cfg));

        const Matrix reference =
            symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
        const Matrix penalties = adaptive_penalties(reference, cfg.lambda, cfg.gamma);
        const Matrix thresholds = cfg.prox_lr * penalties;

        Rng prox_rng(Rng::derive(cfg.seed, 102));
        out.report.stages.push_back(
            detail::run_proximal_stage(ae, train, val, cfg, penalties, thresholds, prox_rng));

        // links the proximal stage zeroed stay zero from here on
        std::vector<Matrix> masks;
        masks.reserve(ae.net.weights.size());
        for (const Matrix& w : ae.net.weights)
            masks.push_back(w.unaryExpr([](double v) { return v == 0.0 ? 1.0 : 0.0; }));

        {
            Rng rng(Rng::derive(cfg.seed, 103));
            out.report.stages.push_back(detail::run_smooth_stage(
                ae, train, val, cfg, detail::SmoothPenaltySpec{}, masks, {"finetune", true}, rng));
        }

        out.report.encoder_mask.assign(masks.begin(), masks.begin() + ae.encoder_layers);
        out.report.decoder_mask.assign(masks.begin() + ae.encoder_layers, masks.end());
    }

    out.report.connection =
        symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
    out.report.connections = 0;
    for (Index i = 0; i < out.report.connection.rows(); ++i)
        for (Index j = 0; j < out.report.connection.cols(); ++j)
            if (out.report.connection(i, j) > cfg.prune_tolerance)
                ++out.report.connections;
    out.report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

}  // namespace pathlasso
