#pragma once

#include "czhash/common.hpp"

#include <filesystem>
#include <random>

namespace czhash {

// Small feed-forward encoder: relu hidden layers with inverted dropout,
// tanh output layer bounding representations to (-1, 1).
struct EncoderConfig {
    int input_dim = 0;
    std::vector<int> hidden_dims{64};
    int output_dim = 0;  // must equal the attribute dimension d
    double dropout_rate = 0.5;
    double init_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<int> layer_dims() const;  // input, hidden..., output
};

struct EncoderParams {
    EncoderConfig config;
    std::vector<Matrix> weights;  // layer l: (dims[l+1] x dims[l])
    std::vector<Vector> biases;

    int num_layers() const { return (int)weights.size(); }
};

struct ForwardCache {
    Matrix input;                      // batch x input_dim
    std::vector<Matrix> activations;   // post-activation per layer
    std::vector<Matrix> dropout_mask;  // hidden layers only; includes 1/(1-p) scaling
    bool train_mode = false;
};

struct EncoderGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

EncoderParams init_params(const EncoderConfig& cfg);

// Returns outputs (batch x output_dim, entries in (-1,1)) and the cache
// needed by backward(). rng is only consulted when dropout is active.
std::pair<Matrix, ForwardCache> forward(const EncoderParams& params, const Matrix& batch,
                                        bool train_mode, std::mt19937_64* rng = nullptr);

// Exact gradients of sum(output .* output_grad) w.r.t. all weights/biases.
EncoderGrads backward(const EncoderParams& params, const ForwardCache& cache,
                      const Matrix& output_grad);

void sgd_step(EncoderParams& params, const EncoderGrads& grads, double learning_rate);

void save_params(const EncoderParams& params, const std::filesystem::path& file);
EncoderParams load_params(const std::filesystem::path& file);

}  // namespace czhash
