#pragma once

#include "pathlasso/trainer.hpp"

#include <Eigen/Eigenvalues>

namespace pathlasso {

/// Linear latent map fitted by eigendecomposition of the sample covariance.
/// Columns of `loadings` are orthonormal, ordered by decreasing explained
/// variance, each flipped so its first nonzero component is positive.
struct PcaModel {
    Vector mean;
    Matrix loadings;  // d_x x d_z
    Vector explained_variance_ratio;
};

inline PcaModel pca_fit(const Matrix& data, Index n_components)
{
    check_shape(data.rows() >= 2, "pca_fit: need at least two rows");
    check_shape(n_components >= 1 && n_components <= data.cols(),
                "pca_fit: component count out of range");

    PcaModel model;
    model.mean = data.colwise().mean();
    const Matrix centered = data.rowwise() - model.mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);

    const Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("pca_fit: eigendecomposition failed");

    // eigenvalues come back ascending
    const Vector values = eig.eigenvalues().reverse();
    const Matrix vectors = eig.eigenvectors().rowwise().reverse();

    model.loadings = vectors.leftCols(n_components);
    for (Index c = 0; c < model.loadings.cols(); ++c) {
        for (Index r = 0; r < model.loadings.rows(); ++r) {
            if (std::abs(model.loadings(r, c)) > 1e-12) {
                if (model.loadings(r, c) < 0.0)
                    model.loadings.col(c) = -model.loadings.col(c);
                break;
            }
        }
    }

    const double total = std::max(values.sum(), 0.0);
    model.explained_variance_ratio = Vector::Zero(n_components);
    if (total > 0.0)
        for (Index c = 0; c < n_components; ++c)
            model.explained_variance_ratio(c) = std::max(values(c), 0.0) / total;
    return model;
}

inline Matrix pca_transform(const PcaModel& model, const Matrix& x)
{
    check_shape(x.cols() == model.mean.size(), "pca_transform: width mismatch");
    return (x.rowwise() - model.mean.transpose()) * model.loadings;
}

inline Matrix pca_reconstruct(const PcaModel& model, const Matrix& x)
{
    return (pca_transform(model, x) * model.loadings.transpose()).rowwise()
        + model.mean.transpose();
}

/// Standard autoencoder: the stage-one training loop alone.
inline TrainedAutoencoder plain_ae_train(const Matrix& train, const Matrix& val,
                                         const AutoencoderSpec& spec, const TrainConfig& cfg)
{
    TrainConfig plain = cfg;
    plain.lambda = 0.0;
    plain.exclusive_weight = 0.0;
    return train_three_stage(train, val, spec, plain);
}

/// Parameter-wise lasso baseline: Adam on loss + lambda * sum|w|, then every
/// weight below the threshold is zeroed (threshold < 0 picks the default,
/// 1e-3 of the largest absolute weight), then a frozen-mask fine-tune stage.
inline TrainedAutoencoder lasso_ae_train(const Matrix& train, const Matrix& val,
                                         const AutoencoderSpec& spec, const TrainConfig& cfg,
                                         double threshold = -1.0)
{
    spec.validate();
    const auto started = std::chrono::steady_clock::now();

    Rng init_rng(cfg.seed);
    TrainedAutoencoder out;
    out.model = make_autoencoder(spec, init_rng);
    Autoencoder& ae = out.model;

    {
        detail::SmoothPenaltySpec pen;
        pen.l1_weight = cfg.lambda;
        Rng rng(Rng::derive(cfg.seed, 100));
        out.report.stages.push_back(
            detail::run_smooth_stage(ae, train, val, cfg, pen, {}, {"lasso", true}, rng));
    }

    double cut = threshold;
    if (cut < 0.0) {
        double largest = 0.0;
        for (const Matrix& w : ae.net.weights)
            largest = std::max(largest, w.cwiseAbs().maxCoeff());
        cut = 1e-3 * largest;
    }

    std::vector<Matrix> masks;
    masks.reserve(ae.net.weights.size());
    double masked = 0.0;
    for (Matrix& w : ae.net.weights) {
        masks.push_back(
            w.unaryExpr([cut](double v) { return std::abs(v) < cut ? 1.0 : 0.0; }));
        masked += masks.back().sum();
        w = (w.cwiseAbs().array() < cut).select(0.0, w);
    }

    // fine-tuning exists to recover from the thresholding; skip it when the
    // threshold removed nothing
    if (masked > 0.0) {
        Rng rng(Rng::derive(cfg.seed, 103));
        out.report.stages.push_back(detail::run_smooth_stage(
            ae, train, val, cfg, detail::SmoothPenaltySpec{}, masks, {"finetune", true}, rng));
    }

    out.report.encoder_mask.assign(masks.begin(), masks.begin() + ae.encoder_layers);
    out.report.decoder_mask.assign(masks.begin() + ae.encoder_layers, masks.end());
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
