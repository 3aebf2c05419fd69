// Command-line front end: generate synthetic data, train the path-lasso
// autoencoder or one of the baselines, evaluate models, and sweep lambda
// grids. Every command writes a manifest with enough information to rerun it
// (feed the manifest back through --config).

#include "pathlasso/pathlasso.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace pathlasso;

namespace {

// ---------------------------------------------------------------------------
// small helpers

std::string file_hash(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("hash: cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string format_double(double v)
{
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<Index> parse_index_list(const std::string& text)
{
    std::vector<Index> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        values.push_back(static_cast<Index>(std::stoll(item)));
    return values;
}

std::vector<double> parse_double_list(const std::string& text)
{
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        values.push_back(std::stod(item));
    return values;
}

void write_manifest(const fs::path& path, const std::string& command, const Json& config,
                    const Json& inputs, const std::vector<std::string>& outputs)
{
    Json manifest;
    manifest["command"] = command;
    manifest["config"] = config;
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    write_json(path.string(), manifest);
}

// config file values fill in options the command line left untouched
template <typename T>
void from_config(const Json& cfg, const char* key, const CLI::App* cmd, const std::string& flag,
                 T& value)
{
    if (cfg.contains(key) && cmd->count(flag) == 0)
        value = cfg.at(key).get<T>();
}

Json load_config_file(const std::string& path)
{
    Json j = read_json(path);
    if (j.contains("config"))
        return j.at("config");  // a manifest was passed
    return j;
}

void write_matrix_csv(const fs::path& path, const Matrix& m)
{
    save_csv(path.string(), m);
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
    int dims = 4;
    int per_cluster = 100;
    double cluster_std = 0.1;
    double noise_std = 0.0;
    std::uint64_t seed = 1;
    std::string out;
    std::string config_path;
};

Json generate_config_json(const GenerateOptions& o)
{
    Json j;
    j["dims"] = o.dims;
    j["per_cluster"] = o.per_cluster;
    j["cluster_std"] = o.cluster_std;
    j["noise_std"] = o.noise_std;
    j["seed"] = o.seed;
    j["out"] = o.out;
    return j;
}

int run_generate(GenerateOptions o, const CLI::App* cmd)
{
    if (!o.config_path.empty()) {
        const Json cfg = load_config_file(o.config_path);
        from_config(cfg, "dims", cmd, "--dims", o.dims);
        from_config(cfg, "per_cluster", cmd, "--per-cluster", o.per_cluster);
        from_config(cfg, "cluster_std", cmd, "--cluster-std", o.cluster_std);
        from_config(cfg, "noise_std", cmd, "--noise-std", o.noise_std);
        from_config(cfg, "seed", cmd, "--seed", o.seed);
        from_config(cfg, "out", cmd, "--out", o.out);
    }
    if (o.out.empty())
        throw ConfigError("generate: --out is required");

    const Dataset ds = generate_hypercube(o.dims, o.per_cluster, o.cluster_std, o.noise_std, o.seed);
    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    save_csv(o.out, ds.x, &ds.labels);

    const std::string manifest_path = o.out + ".manifest.json";
    Json inputs = Json::object();
    write_manifest(manifest_path, "generate", generate_config_json(o), inputs,
                   {o.out, manifest_path});
    std::cout << "wrote " << ds.rows() << " rows x " << ds.cols() << " columns to " << o.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    std::string data;
    bool labels = false;
    bool skip_header = false;
    std::string method = "pathlasso";
    Index latent_dim = 2;
    std::string hidden = "50";
    double lambda = 0.0;
    double gamma = 2.0;
    double exclusive_weight = -1.0;
    double threshold = -1.0;  // lasso baseline; < 0 = auto
    std::uint64_t seed = 1;
    std::uint64_t split_seed = 0;  // 0 = use seed
    double test_frac = 0.2;
    double val_frac = 0.1;
    bool no_standardize = false;
    bool no_bias = false;
    double adam_lr = 1e-3;
    double prox_lr = 1e-2;
    int max_epochs = 2000;
    int patience = 20;
    double min_improvement = 1e-5;
    int eval_every = 1;
    int batch_size = 0;
    int lr_decays = 0;
    double lr_decay = 0.5;
    bool no_substitution = false;
    bool boolean_threshold = false;
    int factor_split = 1;
    int factor_max_sweeps = 200;
    double factor_tolerance = 1e-6;
    std::string out;
    std::string config_path;
};

void merge_train_config(TrainOptions& o, const CLI::App* cmd)
{
    if (o.config_path.empty())
        return;
    const Json cfg = load_config_file(o.config_path);
    from_config(cfg, "data", cmd, "--data", o.data);
    from_config(cfg, "labels", cmd, "--labels", o.labels);
    from_config(cfg, "skip_header", cmd, "--skip-header", o.skip_header);
    from_config(cfg, "method", cmd, "--method", o.method);
    from_config(cfg, "latent_dim", cmd, "--latent-dim", o.latent_dim);
    from_config(cfg, "hidden", cmd, "--hidden", o.hidden);
    from_config(cfg, "lambda", cmd, "--lambda", o.lambda);
    from_config(cfg, "gamma", cmd, "--gamma", o.gamma);
    from_config(cfg, "exclusive_weight", cmd, "--exclusive-weight", o.exclusive_weight);
    from_config(cfg, "threshold", cmd, "--threshold", o.threshold);
    from_config(cfg, "seed", cmd, "--seed", o.seed);
    from_config(cfg, "split_seed", cmd, "--split-seed", o.split_seed);
    from_config(cfg, "test_frac", cmd, "--test-frac", o.test_frac);
    from_config(cfg, "val_frac", cmd, "--val-frac", o.val_frac);
    from_config(cfg, "no_standardize", cmd, "--no-standardize", o.no_standardize);
    from_config(cfg, "no_bias", cmd, "--no-bias", o.no_bias);
    from_config(cfg, "adam_lr", cmd, "--adam-lr", o.adam_lr);
    from_config(cfg, "prox_lr", cmd, "--prox-lr", o.prox_lr);
    from_config(cfg, "max_epochs", cmd, "--max-epochs", o.max_epochs);
    from_config(cfg, "patience", cmd, "--patience", o.patience);
    from_config(cfg, "min_improvement", cmd, "--min-improvement", o.min_improvement);
    from_config(cfg, "eval_every", cmd, "--eval-every", o.eval_every);
    from_config(cfg, "batch_size", cmd, "--batch-size", o.batch_size);
    from_config(cfg, "lr_decays", cmd, "--lr-decays", o.lr_decays);
    from_config(cfg, "lr_decay", cmd, "--lr-decay", o.lr_decay);
    from_config(cfg, "no_substitution", cmd, "--no-substitution", o.no_substitution);
    from_config(cfg, "boolean_threshold", cmd, "--boolean-threshold", o.boolean_threshold);
    from_config(cfg, "factor_split", cmd, "--factor-split", o.factor_split);
    from_config(cfg, "factor_max_sweeps", cmd, "--factor-max-sweeps", o.factor_max_sweeps);
    from_config(cfg, "factor_tolerance", cmd, "--factor-tol", o.factor_tolerance);
    from_config(cfg, "out", cmd, "--out", o.out);
}

Json train_config_json(const TrainOptions& o)
{
    Json j;
    j["data"] = o.data;
    j["labels"] = o.labels;
    j["skip_header"] = o.skip_header;
    j["method"] = o.method;
    j["latent_dim"] = o.latent_dim;
    j["hidden"] = o.hidden;
    j["lambda"] = o.lambda;
    j["gamma"] = o.gamma;
    j["exclusive_weight"] = o.exclusive_weight;
    j["threshold"] = o.threshold;
    j["seed"] = o.seed;
    j["split_seed"] = o.split_seed;
    j["test_frac"] = o.test_frac;
    j["val_frac"] = o.val_frac;
    j["no_standardize"] = o.no_standardize;
    j["no_bias"] = o.no_bias;
    j["adam_lr"] = o.adam_lr;
    j["prox_lr"] = o.prox_lr;
    j["max_epochs"] = o.max_epochs;
    j["patience"] = o.patience;
    j["min_improvement"] = o.min_improvement;
    j["eval_every"] = o.eval_every;
    j["batch_size"] = o.batch_size;
    j["lr_decays"] = o.lr_decays;
    j["lr_decay"] = o.lr_decay;
    j["no_substitution"] = o.no_substitution;
    j["boolean_threshold"] = o.boolean_threshold;
    j["factor_split"] = o.factor_split;
    j["factor_max_sweeps"] = o.factor_max_sweeps;
    j["factor_tolerance"] = o.factor_tolerance;
    j["out"] = o.out;
    return j;
}

std::uint64_t effective_split_seed(const TrainOptions& o)
{
    return o.split_seed != 0 ? o.split_seed : o.seed;
}

Dataset load_split_data(const TrainOptions& o, bool standardize)
{
    Dataset ds = load_csv(o.data, o.labels, o.skip_header);
    split_dataset(ds, o.test_frac, o.val_frac, effective_split_seed(o));
    if (standardize)
        standardize_dataset(ds);
    return ds;
}

std::vector<Index> encoder_dims_for(const TrainOptions& o, Index d_x)
{
    std::vector<Index> dims{d_x};
    for (Index h : parse_index_list(o.hidden))
        dims.push_back(h);
    dims.push_back(o.latent_dim);
    return dims;
}

TrainConfig train_config_for(const TrainOptions& o, Index d_x)
{
    TrainConfig cfg;
    cfg.lambda = o.lambda;
    cfg.gamma = o.gamma;
    cfg.exclusive_weight = o.exclusive_weight;
    cfg.seed = o.seed;
    cfg.adam_lr = o.adam_lr;
    cfg.prox_lr = o.prox_lr;
    cfg.max_epochs = o.max_epochs;
    cfg.patience = o.patience;
    cfg.min_improvement = o.min_improvement;
    cfg.eval_every = o.eval_every;
    cfg.batch_size = o.batch_size;
    cfg.lr_decays = o.lr_decays;
    cfg.lr_decay = o.lr_decay;
    cfg.substitution_stage = !o.no_substitution;
    cfg.boolean_threshold = o.boolean_threshold;
    cfg.factor_max_sweeps = o.factor_max_sweeps;
    cfg.factor_tolerance = o.factor_tolerance;
    if (o.factor_split > 1) {
        // split every encoder layer dimension into near-equal parts
        for (Index dim : encoder_dims_for(o, d_x)) {
            const Index parts = std::min<Index>(o.factor_split, dim);
            std::vector<Index> sizes(static_cast<std::size_t>(parts), dim / parts);
            for (Index r = 0; r < dim % parts; ++r)
                ++sizes[static_cast<std::size_t>(r)];
            cfg.factor_splits.push_back(std::move(sizes));
        }
    }
    return cfg;
}

void write_curves_csv(const fs::path& path, const TrainReport& report)
{
    std::ofstream out(path);
    out << "stage,epoch,train_objective,val_objective\n";
    for (const StageCurve& stage : report.stages) {
        for (std::size_t e = 0; e < stage.train_objective.size(); ++e) {
            out << stage.name << ',' << e << ',' << format_double(stage.train_objective[e]) << ',';
            // validation is only evaluated every eval_every epochs
            const std::size_t vals = stage.val_objective.size();
            const std::size_t epochs = stage.train_objective.size();
            const std::size_t idx = vals ? std::min(e * vals / epochs, vals - 1) : 0;
            if (vals)
                out << format_double(stage.val_objective[idx]);
            out << '\n';
        }
    }
}

struct TrainArtifacts {
    Json meta;
    Matrix connection;  // d_z x d_x analogue for every method
};

TrainArtifacts run_train(const TrainOptions& o)
{
    if (o.data.empty() || o.out.empty())
        throw ConfigError("train: --data and --out are required");
    if (o.method != "pathlasso" && o.method != "lasso" && o.method != "plain" && o.method != "pca")
        throw ConfigError("train: unknown method '" + o.method + "'");

    const fs::path out_dir(o.out);
    fs::create_directories(out_dir / "model");

    const bool standardize = !o.no_standardize && o.method != "pca";
    Dataset ds = load_split_data(o, standardize);
    const Index d_x = ds.cols();

    Json meta;
    meta["method"] = o.method;
    meta["latent_dim"] = o.latent_dim;
    meta["data_path"] = o.data;
    meta["data_hash"] = file_hash(o.data);
    meta["labels"] = o.labels;
    meta["skip_header"] = o.skip_header;
    meta["split"] = {{"test_frac", o.test_frac},
                     {"val_frac", o.val_frac},
                     {"seed", effective_split_seed(o)}};
    meta["seed"] = o.seed;
    meta["lambda"] = o.lambda;
    if (ds.standardization.has_value()) {
        meta["standardization"] = {{"mean", vector_to_json(ds.standardization->mean)},
                                   {"scale", vector_to_json(ds.standardization->scale)}};
    } else {
        meta["standardization"] = nullptr;
    }

    TrainArtifacts artifacts;
    std::vector<std::string> outputs;

    if (o.method == "pca") {
        const PcaModel model = pca_fit(ds.train_x(), o.latent_dim);
        write_json((out_dir / "model" / "pca.json").string(), pca_to_json(model));
        outputs.push_back((out_dir / "model" / "pca.json").string());
        artifacts.connection = model.loadings.cwiseAbs().transpose();

        Json report;
        report["stages"] = Json::array();
        report["connections"] = count_connections(artifacts.connection);
        report["total_seconds"] = 0.0;
        write_json((out_dir / "report.json").string(), report);
    } else {
        const std::vector<Index> enc_dims = encoder_dims_for(o, d_x);
        const AutoencoderSpec spec = AutoencoderSpec::symmetric(enc_dims, !o.no_bias);
        const TrainConfig cfg = train_config_for(o, d_x);

        TrainedAutoencoder trained;
        if (o.method == "pathlasso")
            trained = train_three_stage(ds.train_x(), ds.val_x(), spec, cfg);
        else if (o.method == "lasso")
            trained = lasso_ae_train(ds.train_x(), ds.val_x(), spec, cfg, o.threshold);
        else
            trained = plain_ae_train(ds.train_x(), ds.val_x(), spec, cfg);

        write_json((out_dir / "model" / "encoder.json").string(),
                   network_to_json(trained.model.encoder()));
        write_json((out_dir / "model" / "decoder.json").string(),
                   network_to_json(trained.model.decoder()));
        write_json((out_dir / "model" / "zero_mask.json").string(),
                   masks_to_json(trained.report.encoder_mask, trained.report.decoder_mask));
        write_json((out_dir / "report.json").string(), report_to_json(trained.report));
        write_curves_csv(out_dir / "curves.csv", trained.report);
        outputs.push_back((out_dir / "model" / "encoder.json").string());
        outputs.push_back((out_dir / "model" / "decoder.json").string());
        outputs.push_back((out_dir / "model" / "zero_mask.json").string());
        outputs.push_back((out_dir / "curves.csv").string());
        artifacts.connection = trained.report.connection;
    }

    write_matrix_csv(out_dir / "connections.csv", artifacts.connection);
    outputs.push_back((out_dir / "connections.csv").string());
    outputs.push_back((out_dir / "report.json").string());

    write_json((out_dir / "model" / "meta.json").string(), meta);
    outputs.push_back((out_dir / "model" / "meta.json").string());

    Json inputs;
    inputs[o.data] = meta["data_hash"];
    write_manifest(out_dir / "manifest.json", "train", train_config_json(o), inputs, outputs);

    artifacts.meta = meta;
    return artifacts;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalOptions {
    std::string model;
    std::string data;  // empty = the training data recorded in the meta
    int knn = 10;
    std::string out;  // empty = model dir
    std::string config_path;
};

Json eval_config_json(const EvalOptions& o)
{
    Json j;
    j["model"] = o.model;
    j["data"] = o.data;
    j["knn"] = o.knn;
    j["out"] = o.out;
    return j;
}

MetricReport run_evaluate(const EvalOptions& o)
{
    if (o.model.empty())
        throw ConfigError("evaluate: --model is required");
    const fs::path model_dir(o.model);
    const Json meta = read_json((model_dir / "model" / "meta.json").string());
    const std::string method = meta.at("method").get<std::string>();

    const std::string data_path = o.data.empty() ? meta.at("data_path").get<std::string>() : o.data;
    Dataset ds = load_csv(data_path, meta.at("labels").get<bool>(),
                          meta.at("skip_header").get<bool>());
    split_dataset(ds, meta.at("split").at("test_frac").get<double>(),
                  meta.at("split").at("val_frac").get<double>(),
                  meta.at("split").at("seed").get<std::uint64_t>());

    const Matrix test = ds.test_x();  // raw scale throughout

    Matrix latent, recon, connection;
    if (method == "pca") {
        const PcaModel model = pca_from_json(read_json((model_dir / "model" / "pca.json").string()));
        check_shape(test.cols() == model.mean.size(), "evaluate: model/data dimension mismatch");
        latent = pca_transform(model, test);
        recon = pca_reconstruct(model, test);
        connection = model.loadings.cwiseAbs().transpose();
    } else {
        const Network encoder =
            network_from_json(read_json((model_dir / "model" / "encoder.json").string()));
        const Network decoder =
            network_from_json(read_json((model_dir / "model" / "decoder.json").string()));
        check_shape(test.cols() == encoder.input_dim(), "evaluate: model/data dimension mismatch");
        const Autoencoder ae = make_autoencoder(encoder, decoder);

        Matrix model_in = test;
        if (!meta.at("standardization").is_null()) {
            Standardization st;
            st.mean = vector_from_json(meta.at("standardization").at("mean"));
            st.scale = vector_from_json(meta.at("standardization").at("scale"));
            model_in = st.apply(test);
            latent = ae.latent(model_in);
            recon = st.invert(ae.reconstruct(model_in));
        } else {
            latent = ae.latent(model_in);
            recon = ae.reconstruct(model_in);
        }
        connection = symmetric_connection_matrix(ae.encoder_weights(), ae.decoder_weights());
    }

    MetricReport metrics;
    metrics.r2 = r_squared(test, recon);
    metrics.obs_match = observation_match(test, recon);
    if (ds.has_labels())
        metrics.label_match = label_match(test, recon, ds.labels_at(ds.test_idx));
    const int k = std::min<int>(o.knn, static_cast<int>(test.rows()) - 1);
    if (k >= 1) {
        metrics.knn_match = knn_match(test, recon, k);
        metrics.knn_k = k;
    }
    metrics.connections = count_connections(connection);

    const fs::path out_dir = o.out.empty() ? model_dir : fs::path(o.out);
    fs::create_directories(out_dir);
    write_json((out_dir / "metrics.json").string(), metrics_to_json(metrics));
    write_matrix_csv(out_dir / "latent.csv", latent);
    write_matrix_csv(out_dir / "reconstruction.csv", recon);

    // one results-table row per evaluation
    const fs::path results = out_dir / "results.csv";
    const bool fresh = !fs::exists(results);
    std::ofstream table(results, std::ios::app);
    if (fresh)
        table << "method,lambda,seed,connections,r2,observation_match,label_match,knn_match\n";
    table << method << ',' << format_double(meta.at("lambda").get<double>()) << ','
          << meta.at("seed").get<std::uint64_t>() << ',' << metrics.connections << ','
          << format_double(metrics.r2) << ',' << format_double(metrics.obs_match) << ','
          << (metrics.label_match ? format_double(*metrics.label_match) : "") << ','
          << (metrics.knn_match ? format_double(*metrics.knn_match) : "") << '\n';
    table.close();

    Json inputs;
    inputs[data_path] = file_hash(data_path);
    write_manifest(out_dir / "eval_manifest.json", "evaluate", eval_config_json(o), inputs,
                   {(out_dir / "metrics.json").string(), (out_dir / "latent.csv").string(),
                    (out_dir / "reconstruction.csv").string(), results.string()});
    return metrics;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
    TrainOptions train;
    std::string lambda_grid;
    long target_connections = -1;
    int parallel = 1;
    int knn = 10;
};

int run_sweep(const SweepOptions& o)
{
    std::vector<double> grid;
    if (!o.lambda_grid.empty())
        grid = parse_double_list(o.lambda_grid);
    else if (o.target_connections >= 0)
        grid = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2};
    if (grid.empty())
        throw ConfigError("sweep: need --lambda-grid or --target-connections");
    if (o.train.out.empty())
        throw ConfigError("sweep: --out is required");

    const fs::path out_dir(o.train.out);
    fs::create_directories(out_dir);

    struct Row {
        double lambda = 0.0;
        MetricReport metrics;
        std::string dir;
        std::string error;
    };
    std::vector<Row> rows(grid.size());

    std::mutex failure_mutex;
    const auto run_one = [&](std::size_t g) {
        Row& row = rows[g];
        row.lambda = grid[g];
        char name[32];
        std::snprintf(name, sizeof name, "run_%03zu", g);
        row.dir = (out_dir / name).string();
        try {
            TrainOptions t = o.train;
            t.lambda = grid[g];
            t.out = row.dir;
            run_train(t);
            EvalOptions e;
            e.model = row.dir;
            e.knn = o.knn;
            row.metrics = run_evaluate(e);
        } catch (const std::exception& err) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            row.error = err.what();
        }
    };

    if (o.parallel > 1) {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex next_mutex;
        const int workers = std::min<int>(o.parallel, static_cast<int>(grid.size()));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t g;
                    {
                        const std::lock_guard<std::mutex> lock(next_mutex);
                        if (next >= grid.size())
                            return;
                        g = next++;
                    }
                    run_one(g);
                }
            });
        for (auto& t : pool)
            t.join();
    } else {
        for (std::size_t g = 0; g < grid.size(); ++g)
            run_one(g);
    }

    for (const Row& row : rows)
        if (!row.error.empty())
            throw TrainError("sweep: run at lambda " + format_double(row.lambda)
                             + " failed: " + row.error);

    std::ofstream table(out_dir / "results.csv");
    table << "lambda,dir,connections,r2,observation_match,label_match,knn_match\n";
    for (const Row& row : rows) {
        table << format_double(row.lambda) << ',' << row.dir << ',' << row.metrics.connections
              << ',' << format_double(row.metrics.r2) << ','
              << format_double(row.metrics.obs_match) << ','
              << (row.metrics.label_match ? format_double(*row.metrics.label_match) : "") << ','
              << (row.metrics.knn_match ? format_double(*row.metrics.knn_match) : "") << '\n';
    }
    table.close();

    Json summary;
    if (o.target_connections >= 0) {
        // closest connection count wins, ties go to the larger lambda
        std::size_t best = 0;
        for (std::size_t g = 1; g < rows.size(); ++g) {
            const long d_best = std::labs(rows[best].metrics.connections - o.target_connections);
            const long d_cur = std::labs(rows[g].metrics.connections - o.target_connections);
            if (d_cur < d_best || (d_cur == d_best && rows[g].lambda >= rows[best].lambda))
                best = g;
        }
        summary["selected_lambda"] = rows[best].lambda;
        summary["selected_dir"] = rows[best].dir;
        summary["selected_connections"] = rows[best].metrics.connections;
        summary["target_connections"] = o.target_connections;
    } else {
        summary["target_connections"] = nullptr;
    }
    summary["runs"] = rows.size();
    write_json((out_dir / "summary.json").string(), summary);

    Json config = train_config_json(o.train);
    config["lambda_grid"] = o.lambda_grid;
    config["target_connections"] = o.target_connections;
    config["parallel"] = o.parallel;
    Json inputs;
    inputs[o.train.data] = file_hash(o.train.data);
    write_manifest(out_dir / "manifest.json", "sweep", config, inputs,
                   {(out_dir / "results.csv").string(), (out_dir / "summary.json").string()});

    std::cout << "sweep finished: " << rows.size() << " runs, results in "
              << (out_dir / "results.csv").string() << "\n";
    return 0;
}

void add_train_options(CLI::App* cmd, TrainOptions& o)
{
    cmd->add_option("--data", o.data, "input CSV");
    cmd->add_flag("--labels", o.labels, "last CSV column holds integer labels");
    cmd->add_flag("--skip-header", o.skip_header, "skip one header row");
    cmd->add_option("--method", o.method, "pathlasso|lasso|plain|pca");
    cmd->add_option("--latent-dim", o.latent_dim, "latent dimensionality");
    cmd->add_option("--hidden", o.hidden, "comma-separated hidden widths per side");
    cmd->add_option("--lambda", o.lambda, "regularization strength");
    cmd->add_option("--gamma", o.gamma, "adaptive penalty exponent");
    cmd->add_option("--exclusive-weight", o.exclusive_weight,
                    "exclusive-lasso weight (negative = 0.1*lambda)");
    cmd->add_option("--threshold", o.threshold,
                    "lasso baseline zeroing threshold (negative = 1e-3 of max weight)");
    cmd->add_option("--seed", o.seed, "training seed");
    cmd->add_option("--split-seed", o.split_seed, "data split seed (0 = --seed)");
    cmd->add_option("--test-frac", o.test_frac, "test fraction");
    cmd->add_option("--val-frac", o.val_frac, "validation fraction of the remainder");
    cmd->add_flag("--no-standardize", o.no_standardize, "skip per-column standardization");
    cmd->add_flag("--no-bias", o.no_bias, "disable bias parameters");
    cmd->add_option("--adam-lr", o.adam_lr, "Adam learning rate");
    cmd->add_option("--prox-lr", o.prox_lr, "proximal-stage learning rate");
    cmd->add_option("--max-epochs", o.max_epochs, "epoch cap per stage");
    cmd->add_option("--patience", o.patience, "evaluations without improvement before stopping");
    cmd->add_option("--min-improvement", o.min_improvement, "improvement threshold");
    cmd->add_option("--eval-every", o.eval_every, "epochs between validation evaluations");
    cmd->add_option("--batch-size", o.batch_size, "mini-batch size (0 = full batch)");
    cmd->add_option("--lr-decays", o.lr_decays, "reduce-on-plateau rounds in smooth stages");
    cmd->add_option("--lr-decay", o.lr_decay, "learning-rate factor per plateau round");
    cmd->add_flag("--no-substitution", o.no_substitution, "skip the substitution stage");
    cmd->add_flag("--boolean-threshold", o.boolean_threshold,
                  "boolean-threshold unconverged factorizations");
    cmd->add_option("--factor-split", o.factor_split,
                    "block-split count per layer dimension (1 = off)");
    cmd->add_option("--factor-max-sweeps", o.factor_max_sweeps, "factorization sweep cap");
    cmd->add_option("--factor-tol", o.factor_tolerance, "factorization stop tolerance");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--config", o.config_path, "JSON config (or manifest) supplying any flag");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"path-lasso penalized autoencoders: sparse non-linear dimensionality reduction"};
    app.require_subcommand(1);

    GenerateOptions gen;
    CLI::App* cmd_generate = app.add_subcommand("generate", "write a hypercube-cluster dataset");
    cmd_generate->add_option("--dims", gen.dims, "hypercube dimensionality m (2^m clusters)");
    cmd_generate->add_option("--per-cluster", gen.per_cluster, "points per cluster");
    cmd_generate->add_option("--cluster-std", gen.cluster_std, "within-cluster standard deviation");
    cmd_generate->add_option("--noise-std", gen.noise_std, "additive noise standard deviation");
    cmd_generate->add_option("--seed", gen.seed, "generation seed");
    cmd_generate->add_option("--out", gen.out, "output CSV path");
    cmd_generate->add_option("--config", gen.config_path, "JSON config supplying any flag");

    TrainOptions train;
    CLI::App* cmd_train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_train_options(cmd_train, train);

    EvalOptions eval;
    CLI::App* cmd_eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    cmd_eval->add_option("--model", eval.model, "training output directory");
    cmd_eval->add_option("--data", eval.data, "data CSV (default: the training data)");
    cmd_eval->add_option("--knn", eval.knn, "k for the k-NN reconstruction match");
    cmd_eval->add_option("--out", eval.out, "output directory (default: model dir)");
    cmd_eval->add_option("--config", eval.config_path, "JSON config supplying any flag");

    SweepOptions sweep;
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "train/evaluate over a lambda grid");
    add_train_options(cmd_sweep, sweep.train);
    cmd_sweep->add_option("--lambda-grid", sweep.lambda_grid, "comma-separated lambda values");
    cmd_sweep->add_option("--target-connections", sweep.target_connections,
                          "pick the run whose connection count is closest to this");
    cmd_sweep->add_option("--parallel", sweep.parallel, "concurrent runs");
    cmd_sweep->add_option("--knn", sweep.knn, "k for the k-NN reconstruction match");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_generate->parsed())
            return run_generate(gen, cmd_generate);
        if (cmd_train->parsed()) {
            merge_train_config(train, cmd_train);
            run_train(train);
            std::cout << "model written to " << train.out << "\n";
            return 0;
        }
        if (cmd_eval->parsed()) {
            if (!eval.config_path.empty()) {
                const Json cfg = load_config_file(eval.config_path);
                from_config(cfg, "model", cmd_eval, "--model", eval.model);
                from_config(cfg, "data", cmd_eval, "--data", eval.data);
                from_config(cfg, "knn", cmd_eval, "--knn", eval.knn);
                from_config(cfg, "out", cmd_eval, "--out", eval.out);
            }
            const MetricReport metrics = run_evaluate(eval);
            std::cout << metrics_to_json(metrics).dump(2) << "\n";
            return 0;
        }
        if (cmd_sweep->parsed()) {
            merge_train_config(sweep.train, cmd_sweep);
            return run_sweep(sweep);
        }
    } catch (const std::exception& err) {
        Json error;
        error["error"] = {{"message", err.what()}};
        std::cerr << error.dump() << "\n";
        return 1;
    }
    return 1;
}
