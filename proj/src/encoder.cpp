#include "czhash/encoder.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace czhash {

using nlohmann::json;

void EncoderConfig::validate() const {
    if (input_dim <= 0 || output_dim <= 0)
        throw ConfigError("encoder dims must be positive");
    for (int h : hidden_dims)
        if (h <= 0) throw ConfigError("encoder hidden dims must be positive");
    if (dropout_rate < 0 || dropout_rate >= 1)
        throw ConfigError("dropout_rate must be in [0,1)");
    if (init_scale < 0) throw ConfigError("init_scale must be >= 0");
}

std::vector<int> EncoderConfig::layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(output_dim);
    return dims;
}

EncoderParams init_params(const EncoderConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(-cfg.init_scale, cfg.init_scale);
    EncoderParams p;
    p.config = cfg;
    auto dims = cfg.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l + 1], dims[l]);
        double scale = 1.0 / std::sqrt((double)dims[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = unif(rng) * scale;
        p.weights.push_back(std::move(w));
        p.biases.push_back(Vector::Zero(dims[l + 1]));
    }
    return p;
}

std::pair<Matrix, ForwardCache> forward(const EncoderParams& params, const Matrix& batch,
                                        bool train_mode, std::mt19937_64* rng) {
    if (batch.cols() != params.config.input_dim)
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, expected " + std::to_string(params.config.input_dim));
    ForwardCache cache;
    cache.input = batch;
    cache.train_mode = train_mode;

    double p = params.config.dropout_rate;
    bool use_dropout = train_mode && p > 0.0;
    if (use_dropout && rng == nullptr)
        throw ConfigError("forward: dropout requires an RNG in train mode");
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Matrix cur = batch;
    int L = params.num_layers();
    for (int l = 0; l < L; ++l) {
        Matrix pre = (cur * params.weights[l].transpose()).rowwise() +
                     params.biases[l].transpose();
        if (l + 1 == L) {
            cur = pre.array().tanh();
        } else {
            cur = pre.cwiseMax(0.0);
            if (use_dropout) {
                Matrix mask(cur.rows(), cur.cols());
                double keep = 1.0 - p;
                for (Eigen::Index i = 0; i < mask.rows(); ++i)
                    for (Eigen::Index j = 0; j < mask.cols(); ++j)
                        mask(i, j) = (unif(*rng) < keep) ? 1.0 / keep : 0.0;
                cur = cur.cwiseProduct(mask);
                cache.dropout_mask.push_back(std::move(mask));
            } else {
                cache.dropout_mask.emplace_back();  // empty = identity
            }
        }
        cache.activations.push_back(cur);
    }
    return {cur, std::move(cache)};
}

EncoderGrads backward(const EncoderParams& params, const ForwardCache& cache,
                      const Matrix& output_grad) {
    int L = params.num_layers();
    if ((int)cache.activations.size() != L)
        throw ShapeError("backward: cache does not match encoder depth");
    const Matrix& out = cache.activations.back();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw ShapeError("backward: output_grad shape mismatch");

    EncoderGrads g;
    g.weights.resize(L);
    g.biases.resize(L);

    // tanh' = 1 - out^2 at the output layer
    Matrix delta = output_grad.cwiseProduct((1.0 - out.array().square()).matrix());
    for (int l = L - 1; l >= 0; --l) {
        const Matrix& prev = l == 0 ? cache.input : cache.activations[l - 1];
        g.weights[l] = delta.transpose() * prev;
        g.biases[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = delta * params.weights[l];
            if (cache.dropout_mask[l - 1].size() > 0)
                delta = delta.cwiseProduct(cache.dropout_mask[l - 1]);
            // relu' from the pre-dropout activation sign; masked entries are
            // already zeroed by the dropout factor above
            delta = (cache.activations[l - 1].array() > 0.0).cast<double>().matrix()
                        .cwiseProduct(delta);
        }
    }
    return g;
}

void sgd_step(EncoderParams& params, const EncoderGrads& grads, double learning_rate) {
    for (int l = 0; l < params.num_layers(); ++l) {
        params.weights[l] -= learning_rate * grads.weights[l];
        params.biases[l] -= learning_rate * grads.biases[l];
    }
}

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ParseError("expected matrix array");
    Matrix m((Eigen::Index)j.size(), (Eigen::Index)j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size()) throw ShapeError("ragged matrix in checkpoint");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m((Eigen::Index)i, (Eigen::Index)k) = j[i][k].get<double>();
    }
    return m;
}

}  // namespace

json encoder_to_json(const EncoderParams& params) {
    json j;
    j["input_dim"] = params.config.input_dim;
    j["hidden_dims"] = params.config.hidden_dims;
    j["output_dim"] = params.config.output_dim;
    j["dropout_rate"] = params.config.dropout_rate;
    j["init_scale"] = params.config.init_scale;
    j["seed"] = params.config.seed;
    j["weights"] = json::array();
    j["biases"] = json::array();
    for (int l = 0; l < params.num_layers(); ++l) {
        j["weights"].push_back(matrix_to_json(params.weights[l]));
        json b = json::array();
        for (Eigen::Index i = 0; i < params.biases[l].size(); ++i)
            b.push_back(params.biases[l](i));
        j["biases"].push_back(std::move(b));
    }
    return j;
}

EncoderParams encoder_from_json(const json& j) {
    EncoderParams p;
    try {
        p.config.input_dim = j.at("input_dim").get<int>();
        p.config.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
        p.config.output_dim = j.at("output_dim").get<int>();
        p.config.dropout_rate = j.at("dropout_rate").get<double>();
        p.config.init_scale = j.at("init_scale").get<double>();
        p.config.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& w : j.at("weights")) p.weights.push_back(matrix_from_json(w));
        for (const auto& b : j.at("biases")) {
            Vector v((Eigen::Index)b.size());
            for (std::size_t i = 0; i < b.size(); ++i) v((Eigen::Index)i) = b[i].get<double>();
            p.biases.push_back(std::move(v));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("encoder checkpoint: ") + e.what());
    }
    auto dims = p.config.layer_dims();
    if (p.weights.size() + 1 != dims.size() || p.biases.size() != p.weights.size())
        throw ShapeError("encoder checkpoint: layer count mismatch");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        if (p.weights[l].rows() != dims[l + 1] || p.weights[l].cols() != dims[l] ||
            p.biases[l].size() != dims[l + 1])
            throw ShapeError("encoder checkpoint: layer shape mismatch");
    return p;
}

void save_params(const EncoderParams& params, const std::filesystem::path& file) {
    json j;
    j["format"] = "czhash-encoder v1";
    j["encoder"] = encoder_to_json(params);
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    out << j.dump() << "\n";
}

EncoderParams load_params(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    if (j.value("format", "") != "czhash-encoder v1")
        throw ParseError(file.string() + ": not an encoder checkpoint");
    return encoder_from_json(j.at("encoder"));
}

}  // namespace czhash
