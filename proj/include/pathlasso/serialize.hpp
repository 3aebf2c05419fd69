#pragma once

#include "pathlasso/baselines.hpp"
#include "pathlasso/evaluation.hpp"
#include "pathlasso/network.hpp"
#include "pathlasso/trainer.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace pathlasso {

using Json = nlohmann::json;

inline Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j)
{
    if (!j.is_array() || j.empty())
        throw ParseError("json: expected a non-empty nested array for a matrix");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Index>(row.size()) != cols)
            throw ParseError("json: ragged matrix rows");
        for (Index c = 0; c < cols; ++c)
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

inline Json vector_to_json(const Vector& v)
{
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i)
        out.push_back(v(i));
    return out;
}

inline Vector vector_from_json(const Json& j)
{
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i)
        v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

/// Network as {layer_dims, activations, has_bias, weights, biases}; weights
/// are row-major nested arrays. Finite doubles round-trip bit-identically.
inline Json network_to_json(const Network& net)
{
    Json j;
    j["layer_dims"] = net.layer_dims;
    Json acts = Json::array();
    for (Activation a : net.activations)
        acts.push_back(a == Activation::Tanh ? "tanh" : "identity");
    j["activations"] = std::move(acts);
    Json bias_flags = Json::array();
    Json biases = Json::array();
    for (const Vector& b : net.biases) {
        bias_flags.push_back(b.size() > 0);
        biases.push_back(vector_to_json(b));
    }
    j["has_bias"] = std::move(bias_flags);
    j["biases"] = std::move(biases);
    Json weights = Json::array();
    for (const Matrix& w : net.weights)
        weights.push_back(matrix_to_json(w));
    j["weights"] = std::move(weights);
    return j;
}

inline Network network_from_json(const Json& j)
{
    Network net;
    net.layer_dims = j.at("layer_dims").get<std::vector<Index>>();
    for (const Json& a : j.at("activations")) {
        const std::string name = a.get<std::string>();
        if (name == "tanh")
            net.activations.push_back(Activation::Tanh);
        else if (name == "identity")
            net.activations.push_back(Activation::Identity);
        else
            throw ParseError("json: unknown activation '" + name + "'");
    }
    for (const Json& w : j.at("weights"))
        net.weights.push_back(matrix_from_json(w));
    const auto& bias_flags = j.at("has_bias");
    const auto& biases = j.at("biases");
    for (std::size_t l = 0; l < biases.size(); ++l) {
        if (bias_flags.at(l).get<bool>())
            net.biases.push_back(vector_from_json(biases.at(l)));
        else
            net.biases.push_back(Vector());
    }
    net.validate();
    return net;
}

inline Json pca_to_json(const PcaModel& model)
{
    Json j;
    j["mean"] = vector_to_json(model.mean);
    j["loadings"] = matrix_to_json(model.loadings);
    j["explained_variance_ratio"] = vector_to_json(model.explained_variance_ratio);
    return j;
}

inline PcaModel pca_from_json(const Json& j)
{
    PcaModel model;
    model.mean = vector_from_json(j.at("mean"));
    model.loadings = matrix_from_json(j.at("loadings"));
    model.explained_variance_ratio = vector_from_json(j.at("explained_variance_ratio"));
    return model;
}

inline Json metrics_to_json(const MetricReport& m)
{
    Json j;
    j["r2"] = m.r2;
    j["observation_match"] = m.obs_match;
    j["label_match"] = m.label_match.has_value() ? Json(*m.label_match) : Json(nullptr);
    j["knn_match"] = m.knn_match.has_value() ? Json(*m.knn_match) : Json(nullptr);
    j["knn_k"] = m.knn_k;
    j["connections"] = m.connections;
    return j;
}

inline Json masks_to_json(const std::vector<Matrix>& encoder, const std::vector<Matrix>& decoder)
{
    Json j;
    Json enc = Json::array();
    for (const Matrix& m : encoder)
        enc.push_back(matrix_to_json(m));
    Json dec = Json::array();
    for (const Matrix& m : decoder)
        dec.push_back(matrix_to_json(m));
    j["encoder"] = std::move(enc);
    j["decoder"] = std::move(dec);
    return j;
}

/// Report without the curves (those go to a CSV); wall-clock lives here, not
/// in the manifest, so manifests stay byte-identical across reruns.
inline Json report_to_json(const TrainReport& report)
{
    Json stages = Json::array();
    for (const StageCurve& s : report.stages) {
        Json stage;
        stage["name"] = s.name;
        stage["epochs"] = s.train_objective.size();
        stage["final_train_objective"] =
            s.train_objective.empty() ? Json(nullptr) : Json(s.train_objective.back());
        stage["final_val_objective"] =
            s.val_objective.empty() ? Json(nullptr) : Json(s.val_objective.back());
        stage["seconds"] = s.seconds;
        stages.push_back(std::move(stage));
    }
    Json j;
    j["stages"] = std::move(stages);
    j["connections"] = report.connections;
    j["total_seconds"] = report.total_seconds;
    return j;
}

inline void write_json(const std::string& path, const Json& j)
{
    std::ofstream out(path);
    if (!out)
        throw ParseError("json: cannot write " + path);
    out << j.dump(2) << '\n';
}

inline Json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("json: cannot open " + path);
    return Json::parse(in);
}

}  // namespace pathlasso
