#include "pathlasso/trainer.hpp"
#include "pathlasso/data.hpp"
#include "pathlasso/evaluation.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace pathlasso;
using testutil::random_matrix;

namespace {

Autoencoder random_autoencoder(const std::vector<Index>& encoder_dims, std::uint64_t seed)
{
    Rng rng(seed);
    return make_autoencoder(AutoencoderSpec::symmetric(encoder_dims), rng);
}

TrainConfig fast_config(double lambda, std::uint64_t seed)
{
    TrainConfig cfg;
    cfg.lambda = lambda;
    cfg.seed = seed;
    cfg.max_epochs = 400;
    cfg.patience = 10;
    cfg.eval_every = 2;
    cfg.adam_lr = 5e-3;
    return cfg;
}

struct SplitData {
    Matrix train, val, test;
    std::vector<int> test_labels;
};

SplitData standardized_hypercube(int dims, int per_cluster, double noise, std::uint64_t seed)
{
    Dataset ds = generate_hypercube(dims, per_cluster, 0.1, noise, seed);
    split_dataset(ds, 0.2, 0.1, seed);
    standardize_dataset(ds);
    return {ds.train_x(), ds.val_x(), ds.test_x(), ds.labels_at(ds.test_idx)};
}

}  // namespace

TEST_CASE("symmetric connection matrix reduces to one side when the other is zero", "[trainer]")
{
    Rng rng(50);
    Autoencoder ae = random_autoencoder({3, 5, 2}, 50);
    std::vector<Matrix> enc = ae.encoder_weights();
    std::vector<Matrix> dec = ae.decoder_weights();
    for (auto& w : dec)
        w.setZero();
    const Matrix sym = symmetric_connection_matrix(enc, dec);
    REQUIRE((sym - connection_matrix(enc)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("diagonal encoder and decoder of equal magnitude give m sqrt(2)", "[trainer]")
{
    Vector d(2);
    d << 0.7, 1.3;
    const std::vector<Matrix> enc{Matrix(d.asDiagonal())};
    const std::vector<Matrix> dec{Matrix(d.asDiagonal())};
    const Matrix sym = symmetric_connection_matrix(enc, dec);
    REQUIRE(sym(0, 0) == Catch::Approx(0.7 * std::sqrt(2.0)));
    REQUIRE(sym(1, 1) == Catch::Approx(1.3 * std::sqrt(2.0)));
    REQUIRE(sym(0, 1) == 0.0);
}

TEST_CASE("symmetric entry is zero exactly when both sides are disconnected", "[trainer]")
{
    Rng rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        Autoencoder ae = random_autoencoder({3, 4, 2}, 51 + trial);
        // break some connections on each side
        ae.net.weights[0].row(static_cast<Index>(rng.below(4))).setZero();
        ae.net.weights[3].col(static_cast<Index>(rng.below(4))).setZero();
        const std::vector<Matrix> enc = ae.encoder_weights();
        const std::vector<Matrix> dec = ae.decoder_weights();
        const Matrix sym = symmetric_connection_matrix(enc, dec);
        const Matrix enc_conn = connection_matrix(enc);
        const Matrix dec_conn = connection_matrix(dec);
        for (Index j = 0; j < sym.rows(); ++j)
            for (Index i = 0; i < sym.cols(); ++i) {
                const bool both_zero = enc_conn(j, i) == 0.0 && dec_conn(i, j) == 0.0;
                REQUIRE((sym(j, i) == 0.0) == both_zero);
            }
    }
}

TEST_CASE("wpl-sum gradient matches finite differences", "[trainer]")
{
    Autoencoder ae = random_autoencoder({3, 4, 2}, 52);
    // keep weights away from zero so the square root stays differentiable
    for (auto& w : ae.net.weights)
        w = w.unaryExpr([](double v) { return v >= 0.0 ? v + 0.15 : v - 0.15; });
    const std::vector<Matrix> enc = ae.encoder_weights();
    const std::vector<Matrix> dec = ae.decoder_weights();
    const SymmetricPenalty pen = wpl_sum_penalty(enc, dec);

    const auto enc_fd = testutil::fd_weight_gradients(enc, [&dec](const std::vector<Matrix>& w) {
        return symmetric_connection_matrix(w, dec).sum();
    });
    const auto dec_fd = testutil::fd_weight_gradients(dec, [&enc](const std::vector<Matrix>& w) {
        return symmetric_connection_matrix(enc, w).sum();
    });
    for (std::size_t l = 0; l < enc.size(); ++l)
        REQUIRE((pen.d_encoder[l] - enc_fd[l]).cwiseAbs().maxCoeff() < 1e-6);
    for (std::size_t l = 0; l < dec.size(); ++l)
        REQUIRE((pen.d_decoder[l] - dec_fd[l]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("symmetric exclusive gradient matches finite differences", "[trainer]")
{
    Autoencoder ae = random_autoencoder({3, 4, 2}, 53);
    for (auto& w : ae.net.weights)
        w = w.unaryExpr([](double v) { return v >= 0.0 ? v + 0.15 : v - 0.15; });
    const std::vector<Matrix> enc = ae.encoder_weights();
    const std::vector<Matrix> dec = ae.decoder_weights();
    const SymmetricPenalty pen = symmetric_exclusive_penalty(enc, dec);

    const auto value = [](const std::vector<Matrix>& e, const std::vector<Matrix>& d) {
        return exclusive_lasso_value(symmetric_connection_matrix(e, d), GroupAxis::Row);
    };
    const auto enc_fd = testutil::fd_weight_gradients(
        enc, [&](const std::vector<Matrix>& w) { return value(w, dec); });
    const auto dec_fd = testutil::fd_weight_gradients(
        dec, [&](const std::vector<Matrix>& w) { return value(enc, w); });
    for (std::size_t l = 0; l < enc.size(); ++l)
        REQUIRE((pen.d_encoder[l] - enc_fd[l]).cwiseAbs().maxCoeff() < 1e-6);
    for (std::size_t l = 0; l < dec.size(); ++l)
        REQUIRE((pen.d_decoder[l] - dec_fd[l]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("proximal step with zero penalty is exactly one gradient step", "[trainer]")
{
    Rng rng(54);
    Autoencoder ae = random_autoencoder({3, 5, 2}, 54);
    const Matrix batch = random_matrix(12, 3, rng);

    TrainConfig cfg = fast_config(0.0, 54);
    Autoencoder reference = ae;
    {
        Gradients grads = backprop(reference.net, batch, batch);
        OptimizerState sgd = make_plain_sgd(cfg.prox_lr);
        optimizer_step(reference.net, grads, sgd);
    }
    proximal_path_step(ae, batch, cfg, Matrix::Zero(2, 3));
    for (std::size_t l = 0; l < ae.net.weights.size(); ++l)
        REQUIRE((ae.net.weights[l] - reference.net.weights[l]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("prune-immediately thresholds disconnect everything in one step", "[trainer]")
{
    Rng rng(55);
    Autoencoder ae = random_autoencoder({3, 5, 2}, 55);
    const Matrix batch = random_matrix(12, 3, rng);
    TrainConfig cfg = fast_config(1.0, 55);
    const Matrix sentinel = Matrix::Constant(2, 3, kPruneImmediately);
    proximal_path_step(ae, batch, cfg, sentinel);

    const Matrix enc_conn = connection_matrix(ae.encoder_weights());
    const Matrix dec_conn = connection_matrix(ae.decoder_weights());
    REQUIRE(enc_conn.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(dec_conn.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("proximal step shrinks a scalar chain exactly as the group prox", "[trainer]")
{
    // encoder 2 -> 1 -> 1, decoder 1 -> 1 -> 2: one path per side and
    // connection, so the penalized path values follow the scalar formula.
    Autoencoder ae = random_autoencoder({2, 1, 1}, 56);
    Rng data_rng(56);
    const Matrix batch = random_matrix(8, 2, data_rng);

    TrainConfig cfg = fast_config(0.0, 56);
    cfg.exclusive_weight = 0.0;

    // gradient half-step done manually to know the post-gradient weights
    Autoencoder stepped = ae;
    {
        Gradients grads = backprop(stepped.net, batch, batch);
        OptimizerState sgd = make_plain_sgd(cfg.prox_lr);
        optimizer_step(stepped.net, grads, sgd);
    }
    Matrix thresholds(1, 2);
    thresholds << 0.05, 0.02;

    const std::vector<Matrix> enc = stepped.encoder_weights();
    const std::vector<Matrix> dec = stepped.decoder_weights();
    const Matrix sym = symmetric_connection_matrix(enc, dec);
    Matrix expected_enc(1, 2), expected_dec(2, 1);
    for (Index i = 0; i < 2; ++i) {
        const double factor = std::max(1.0 - thresholds(0, i) / sym(0, i), 0.0);
        expected_enc(0, i) = std::abs(enc[1](0, 0)) * std::abs(enc[0](0, i)) * factor;
        expected_dec(i, 0) = std::abs(dec[1](i, 0)) * std::abs(dec[0](0, 0)) * factor;
    }

    proximal_path_step(ae, batch, cfg, thresholds);
    const std::vector<Matrix> enc_after = ae.encoder_weights();
    const std::vector<Matrix> dec_after = ae.decoder_weights();
    for (Index i = 0; i < 2; ++i) {
        const double enc_path = std::abs(enc_after[1](0, 0) * enc_after[0](0, i));
        const double dec_path = std::abs(dec_after[1](i, 0) * dec_after[0](0, 0));
        REQUIRE(enc_path == Catch::Approx(expected_enc(0, i)).margin(1e-6));
        REQUIRE(dec_path == Catch::Approx(expected_dec(i, 0)).margin(1e-6));
    }
}

TEST_CASE("freeze mask is a no-op when empty and total when full", "[trainer]")
{
    Autoencoder ae = random_autoencoder({3, 4, 2}, 57);
    Network copy = ae.net;
    freeze_mask_apply(copy, {});
    for (std::size_t l = 0; l < copy.weights.size(); ++l)
        REQUIRE(copy.weights[l] == ae.net.weights[l]);

    std::vector<Matrix> full;
    for (const Matrix& w : copy.weights)
        full.push_back(Matrix::Ones(w.rows(), w.cols()));
    freeze_mask_apply(copy, full);
    for (const Matrix& w : copy.weights)
        REQUIRE(w.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked entries stay exactly zero through 100 adam steps", "[trainer]")
{
    Rng rng(58);
    Autoencoder ae = random_autoencoder({3, 4, 3}, 58);
    const Matrix data = random_matrix(16, 3, rng);

    std::vector<Matrix> masks;
    for (const Matrix& w : ae.net.weights) {
        Matrix m = Matrix::Zero(w.rows(), w.cols());
        m(0, 0) = 1.0;
        masks.push_back(m);
    }
    freeze_mask_apply(ae.net, masks);
    OptimizerState opt = make_adam(ae.net, 1e-2);
    for (int step = 0; step < 100; ++step) {
        Gradients grads = backprop(ae.net, data, data);
        optimizer_step(ae.net, grads, opt);
        freeze_mask_apply(ae.net, masks);
    }
    for (const Matrix& w : ae.net.weights)
        REQUIRE(w(0, 0) == 0.0);
    // unmasked entries did move
    REQUIRE(ae.net.weights[0](1, 0) != 0.0);
}

TEST_CASE("substitution stage with zero lambda equals plain stage-one training", "[trainer]")
{
    const SplitData data = standardized_hypercube(3, 12, 0.0, 59);
    TrainConfig cfg = fast_config(0.0, 59);
    cfg.max_epochs = 60;

    Autoencoder a = random_autoencoder({3, 6, 2}, 59);
    Autoencoder b = a;
    substitution_stage(a, data.train, data.val, cfg);

    detail::SmoothPenaltySpec none;
    none.exclusive_weight = cfg.exclusive();
    Rng rng(Rng::derive(cfg.seed, 101));
    detail::run_smooth_stage(b, data.train, data.val, cfg, none, {}, {"smooth", true}, rng);
    for (std::size_t l = 0; l < a.net.weights.size(); ++l)
        REQUIRE(a.net.weights[l] == b.net.weights[l]);
}

TEST_CASE("substitution stage drives weak connections well below strong ones", "[trainer]")
{
    const SplitData data = standardized_hypercube(4, 25, 0.0, 60);
    TrainConfig cfg = fast_config(0.0, 60);
    cfg.max_epochs = 600;
    cfg.patience = 20;

    Autoencoder ae = random_autoencoder({4, 16, 2}, 60);
    // settle reconstruction first
    {
        detail::SmoothPenaltySpec pen;
        Rng rng(Rng::derive(cfg.seed, 100));
        detail::run_smooth_stage(ae, data.train, data.val, cfg, pen, {}, {"smooth", true}, rng);
    }
    TrainConfig sub_cfg = cfg;
    sub_cfg.lambda = 0.02;
    substitution_stage(ae, data.train, data.val, sub_cfg);

    const Matrix conn = symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
    std::vector<double> entries(conn.data(), conn.data() + conn.size());
    std::sort(entries.begin(), entries.end());
    const double largest = entries.back();
    // with two latent dimensions for four inputs, half of the eight
    // connections are redundant and the surrogate should crush them
    REQUIRE(entries[3] < 0.1 * largest);
}

TEST_CASE("lambda zero training keeps every connection", "[trainer]")
{
    const SplitData data = standardized_hypercube(3, 12, 0.0, 61);
    TrainConfig cfg = fast_config(0.0, 61);
    cfg.max_epochs = 40;
    const TrainedAutoencoder out =
        train_three_stage(data.train, data.val, AutoencoderSpec::symmetric({3, 6, 2}), cfg);
    REQUIRE(out.report.connections == 6);
    REQUIRE(out.report.stages.size() == 1);
}

TEST_CASE("huge lambda prunes everything and reconstruction collapses", "[trainer]")
{
    const SplitData data = standardized_hypercube(3, 12, 0.0, 62);
    TrainConfig cfg = fast_config(1e6, 62);
    cfg.max_epochs = 120;
    const TrainedAutoencoder out =
        train_three_stage(data.train, data.val, AutoencoderSpec::symmetric({3, 6, 2}), cfg);
    REQUIRE(out.report.connections == 0);
    REQUIRE(out.report.connection.cwiseAbs().maxCoeff() <= 1e-12);

    // a constant reconstruction cannot beat the per-column test mean
    const Matrix recon = out.model.reconstruct(data.test);
    REQUIRE(r_squared(data.test, recon) <= 1e-10);
}

TEST_CASE("three-stage training prunes permanently and symmetrically", "[trainer]")
{
    const SplitData data = standardized_hypercube(4, 25, 0.0, 63);
    TrainConfig cfg = fast_config(0.02, 63);
    cfg.max_epochs = 500;
    cfg.patience = 15;

    // observer tracks the pruned set across proximal epochs and keeps the
    // stage-two endpoint for the bias-reduction check below
    std::vector<std::set<std::pair<Index, Index>>> pruned_history;
    Autoencoder stage2_end;
    cfg.observer = [&](const std::string& stage, int, const Autoencoder& ae) {
        if (stage != "proximal")
            return;
        stage2_end = ae;
        std::set<std::pair<Index, Index>> zeros;
        const Matrix sym =
            symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
        for (Index i = 0; i < sym.rows(); ++i)
            for (Index j = 0; j < sym.cols(); ++j)
                if (sym(i, j) < 1e-12)
                    zeros.insert({i, j});
        pruned_history.push_back(std::move(zeros));
    };

    const TrainedAutoencoder out =
        train_three_stage(data.train, data.val, AutoencoderSpec::symmetric({4, 16, 2}), cfg);

    // prune permanence: the zero set never loses a member across epochs
    for (std::size_t e = 1; e < pruned_history.size(); ++e)
        for (const auto& entry : pruned_history[e - 1])
            REQUIRE(pruned_history[e].count(entry) == 1);

    // pruning actually happened at this lambda
    REQUIRE(out.report.connections < 8);
    REQUIRE(out.report.connections > 0);

    // final-model symmetry: encoder side dead iff decoder side dead
    const Matrix enc_conn = connection_matrix(out.model.encoder_weights());
    const Matrix dec_conn = connection_matrix(out.model.decoder_weights());
    for (Index j = 0; j < enc_conn.rows(); ++j)
        for (Index i = 0; i < enc_conn.cols(); ++i)
            REQUIRE((enc_conn(j, i) == 0.0) == (dec_conn(i, j) == 0.0));

    // Proposition 2 end to end: pruned connections have zero derivative
    Rng rng(630);
    const Network encoder = out.model.encoder();
    for (Index j = 0; j < enc_conn.rows(); ++j)
        for (Index i = 0; i < enc_conn.cols(); ++i) {
            if (enc_conn(j, i) != 0.0)
                continue;
            for (int probe = 0; probe < 10; ++probe) {
                Vector x = random_matrix(4, 1, rng).col(0);
                Vector xp = x, xm = x;
                xp(i) += 1e-5;
                xm(i) -= 1e-5;
                const double deriv =
                    (forward(encoder, xp).back()(j) - forward(encoder, xm).back()(j)) / 2e-5;
                REQUIRE(std::abs(deriv) < 1e-8);
            }
        }

    // masked links stayed zero through stage three
    const std::vector<Matrix> enc_weights = out.model.encoder_weights();
    for (std::size_t l = 0; l < out.report.encoder_mask.size(); ++l) {
        const Matrix& mask = out.report.encoder_mask[l];
        for (Index r = 0; r < mask.rows(); ++r)
            for (Index c = 0; c < mask.cols(); ++c)
                if (mask(r, c) != 0.0)
                    REQUIRE(enc_weights[l](r, c) == 0.0);
    }

    // fine-tuning reduced (or held) the reconstruction loss relative to the
    // stage-two endpoint
    const auto& stages = out.report.stages;
    REQUIRE(stages.back().name == "finetune");
    bool saw_proximal = false;
    for (const auto& s : stages)
        if (s.name == "proximal")
            saw_proximal = true;
    REQUIRE(saw_proximal);
    const double recon_after = l2_loss(out.model.net, data.val, data.val);
    const double recon_stage2 = l2_loss(stage2_end.net, data.val, data.val);
    REQUIRE(recon_after <= recon_stage2 + 1e-9);
}

TEST_CASE("training is deterministic given seed and config", "[trainer]")
{
    const SplitData data = standardized_hypercube(3, 12, 0.0, 64);
    TrainConfig cfg = fast_config(0.05, 64);
    cfg.max_epochs = 80;

    const AutoencoderSpec spec = AutoencoderSpec::symmetric({3, 8, 2});
    const TrainedAutoencoder a = train_three_stage(data.train, data.val, spec, cfg);
    const TrainedAutoencoder b = train_three_stage(data.train, data.val, spec, cfg);

    REQUIRE(a.report.connections == b.report.connections);
    REQUIRE(a.report.connection == b.report.connection);
    REQUIRE(a.report.stages.size() == b.report.stages.size());
    for (std::size_t s = 0; s < a.report.stages.size(); ++s) {
        REQUIRE(a.report.stages[s].train_objective == b.report.stages[s].train_objective);
        REQUIRE(a.report.stages[s].val_objective == b.report.stages[s].val_objective);
    }
    for (std::size_t l = 0; l < a.model.net.weights.size(); ++l)
        REQUIRE(a.model.net.weights[l] == b.model.net.weights[l]);
}
