#pragma once

#include "czhash/dataset.hpp"
#include "czhash/encoder.hpp"
#include "czhash/similarity.hpp"

#include <utility>

namespace czhash {

enum class Ablation { full, nFS, nLS, nJ };
enum class SimilarityScale { unit, plus_minus };

Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);

// Which similarity matrices an ablation trains on.
SimilarityMode similarity_mode_for(Ablation a);

struct TrainerConfig {
    double alpha = 1.0;   // category-space weight
    double beta = 1.0;    // quantization weight
    double lambda = 1.0;  // scale inside the sign step; never affects the argmax
    int bits = 16;
    int batch_size = 128;
    int iterations = 500;     // outer epochs
    int steps_per_epoch = 0;  // 0 = one pass over the training set
    double learning_rate = 1e-2;
    SimilarityScale similarity_scale = SimilarityScale::unit;
    Ablation ablation = Ablation::full;
    bool closed_form_w = false;  // refresh W by ridge least squares instead of gradient steps
    bool exact_f = false;        // recompute every F row after each minibatch
    std::uint64_t seed = 0;

    void validate() const;
};

struct LossBreakdown {
    double sim11 = 0, sim22 = 0, sim12 = 0;
    double cat1 = 0, cat2 = 0;
    double quant1 = 0, quant2 = 0;
    double total = 0;
};

struct TrainState {
    Matrix f1, f2;      // n_train x d deep features (row k = train_indices[k])
    Matrix c1, c2;      // n_train x c category representations
    Matrix w1, w2;      // c x b projections
    Matrix codes;       // n_train x b, entries in {-1,+1}; shared across modalities
    int iteration = 0;
    std::vector<LossBreakdown> history;
};

struct TrainResult {
    EncoderParams encoder1, encoder2;
    TrainState state;
};

// Inner products are compared against similarities on a common scale:
// F F^T is divided by d, and under plus_minus the targets are mapped to
// 2S - 1. Returns the scale factor applied to F F^T.
double similarity_scale_factor(const TrainerConfig& cfg, int d);
Matrix similarity_target(const Matrix& s, const TrainerConfig& cfg);

LossBreakdown total_loss(const TrainState& state, const SimilarityMatrices& sims,
                         const AttributeMatrix& attrs, const TrainerConfig& cfg);

// Gradients of total_loss w.r.t. the listed F/C rows (batch holds positions
// into the training set). The category term flows into dF; the quantization
// term does not (it reaches C and W through their own updates).
std::pair<Matrix, Matrix> grad_features(const TrainState& state, const SimilarityMatrices& sims,
                                        const AttributeMatrix& attrs, const TrainerConfig& cfg,
                                        const std::vector<int>& batch);

std::pair<Matrix, Matrix> grad_category(const TrainState& state, const AttributeMatrix& attrs,
                                        const TrainerConfig& cfg, const std::vector<int>& batch);

std::pair<Matrix, Matrix> grad_projection(const TrainState& state, const TrainerConfig& cfg);

// Ridge least-squares refresh W = (C^T C + eps I)^{-1} C^T B.
std::pair<Matrix, Matrix> closed_form_projection(const TrainState& state, double epsilon = 1e-8);

// B = sign(lambda (C1 W1 + C2 W2)) with sign(0) -> +1.
Matrix update_codes(const TrainState& state, const TrainerConfig& cfg);

// Ridge fit of representations to the attribute space: C = F A^T (A A^T + eps I)^{-1}.
Matrix fit_category(const Matrix& features, const AttributeMatrix& attrs, double epsilon = 1e-8);

TrainResult train(const CrossModalDataset& ds, const ScenarioSplit& split,
                  const SimilarityMatrices& sims, const EncoderConfig& enc_cfg1,
                  const EncoderConfig& enc_cfg2, const TrainerConfig& cfg);

}  // namespace czhash
