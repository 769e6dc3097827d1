#include "czhash/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace czhash {

Ablation ablation_from_string(const std::string& s) {
    if (s == "full") return Ablation::full;
    if (s == "nFS" || s == "nfs") return Ablation::nFS;
    if (s == "nLS" || s == "nls") return Ablation::nLS;
    if (s == "nJ" || s == "nj") return Ablation::nJ;
    throw ConfigError("unknown ablation '" + s + "'");
}

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::nFS: return "nFS";
        case Ablation::nLS: return "nLS";
        case Ablation::nJ: return "nJ";
    }
    return "?";
}

SimilarityMode similarity_mode_for(Ablation a) {
    switch (a) {
        case Ablation::nFS: return SimilarityMode::label_only;
        case Ablation::nLS: return SimilarityMode::feature_only;
        default: return SimilarityMode::composite;
    }
}

void TrainerConfig::validate() const {
    if (alpha < 0 || beta < 0) throw ConfigError("alpha and beta must be >= 0");
    if (lambda <= 0) throw ConfigError("lambda must be positive");
    if (bits < 1) throw ConfigError("bits must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
}

double similarity_scale_factor(const TrainerConfig&, int d) {
    return 1.0 / (double)d;
}

Matrix similarity_target(const Matrix& s, const TrainerConfig& cfg) {
    if (cfg.similarity_scale == SimilarityScale::plus_minus)
        return (2.0 * s.array() - 1.0).matrix();
    return s;
}

LossBreakdown total_loss(const TrainState& state, const SimilarityMatrices& sims,
                         const AttributeMatrix& attrs, const TrainerConfig& cfg) {
    const Matrix& a = attrs.vectors;
    int d = (int)a.cols();
    if (state.f1.cols() != d || state.f2.cols() != d)
        throw ShapeError("total_loss: feature dim != attribute dim");
    if (state.f1.rows() != sims.s11.rows())
        throw ShapeError("total_loss: F rows != similarity size");
    double k = similarity_scale_factor(cfg, d);

    LossBreakdown loss;
    loss.sim11 = (k * state.f1 * state.f1.transpose() - similarity_target(sims.s11, cfg)).squaredNorm();
    loss.sim22 = (k * state.f2 * state.f2.transpose() - similarity_target(sims.s22, cfg)).squaredNorm();
    loss.sim12 = 2.0 * (k * state.f1 * state.f2.transpose() - similarity_target(sims.s12, cfg)).squaredNorm();
    loss.cat1 = (state.f1 - state.c1 * a).squaredNorm();
    loss.cat2 = (state.f2 - state.c2 * a).squaredNorm();
    loss.quant1 = (state.c1 * state.w1 - state.codes).squaredNorm();
    loss.quant2 = (state.c2 * state.w2 - state.codes).squaredNorm();
    loss.total = loss.sim11 + loss.sim22 + loss.sim12 + cfg.alpha * (loss.cat1 + loss.cat2) +
                 cfg.beta * (loss.quant1 + loss.quant2);
    return loss;
}

namespace {

Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
    Matrix out((Eigen::Index)rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row((Eigen::Index)k) = m.row(rows[k]);
    return out;
}

Matrix select_cols_transposed(const Matrix& m, const std::vector<int>& cols) {
    // rows of the transpose, i.e. out.row(k) = m.col(cols[k])^T
    Matrix out((Eigen::Index)cols.size(), m.rows());
    for (std::size_t k = 0; k < cols.size(); ++k)
        out.row((Eigen::Index)k) = m.col(cols[k]).transpose();
    return out;
}

}  // namespace

std::pair<Matrix, Matrix> grad_features(const TrainState& state, const SimilarityMatrices& sims,
                                        const AttributeMatrix& attrs, const TrainerConfig& cfg,
                                        const std::vector<int>& batch) {
    const Matrix& a = attrs.vectors;
    int d = (int)a.cols();
    double k = similarity_scale_factor(cfg, d);
    Matrix t11 = similarity_target(sims.s11, cfg);
    Matrix t22 = similarity_target(sims.s22, cfg);
    Matrix t12 = similarity_target(sims.s12, cfg);

    Matrix f1b = select_rows(state.f1, batch);
    Matrix f2b = select_rows(state.f2, batch);

    // residual rows restricted to the batch; the cross term is
    // 2 || k F1 F2^T - T12 ||_F^2 with T12(i,j) pairing row i of modality 1
    // with row j of modality 2
    Matrix r11b = k * f1b * state.f1.transpose() - select_rows(t11, batch);
    Matrix r22b = k * f2b * state.f2.transpose() - select_rows(t22, batch);
    Matrix r12b = k * f1b * state.f2.transpose() - select_rows(t12, batch);       // rows of R12
    Matrix r12tb = k * f2b * state.f1.transpose() - select_cols_transposed(t12, batch);  // rows of R12^T

    Matrix df1 = 4.0 * k * r11b * state.f1 + 4.0 * k * r12b * state.f2;
    Matrix df2 = 4.0 * k * r22b * state.f2 + 4.0 * k * r12tb * state.f1;
    if (cfg.alpha != 0.0) {
        df1 += 2.0 * cfg.alpha * (f1b - select_rows(state.c1, batch) * a);
        df2 += 2.0 * cfg.alpha * (f2b - select_rows(state.c2, batch) * a);
    }
    return {std::move(df1), std::move(df2)};
}

std::pair<Matrix, Matrix> grad_category(const TrainState& state, const AttributeMatrix& attrs,
                                        const TrainerConfig& cfg, const std::vector<int>& batch) {
    const Matrix& a = attrs.vectors;
    Matrix c1b = select_rows(state.c1, batch);
    Matrix c2b = select_rows(state.c2, batch);
    Matrix dc1 = -2.0 * cfg.alpha * (select_rows(state.f1, batch) - c1b * a) * a.transpose();
    Matrix dc2 = -2.0 * cfg.alpha * (select_rows(state.f2, batch) - c2b * a) * a.transpose();
    if (cfg.beta != 0.0) {
        Matrix bb = select_rows(state.codes, batch);
        dc1 += 2.0 * cfg.beta * (c1b * state.w1 - bb) * state.w1.transpose();
        dc2 += 2.0 * cfg.beta * (c2b * state.w2 - bb) * state.w2.transpose();
    }
    return {std::move(dc1), std::move(dc2)};
}

std::pair<Matrix, Matrix> grad_projection(const TrainState& state, const TrainerConfig& cfg) {
    Matrix dw1 = 2.0 * cfg.beta * (state.c1.transpose() * (state.c1 * state.w1 - state.codes));
    Matrix dw2 = 2.0 * cfg.beta * (state.c2.transpose() * (state.c2 * state.w2 - state.codes));
    return {std::move(dw1), std::move(dw2)};
}

std::pair<Matrix, Matrix> closed_form_projection(const TrainState& state, double epsilon) {
    auto solve = [&](const Matrix& c) {
        Matrix gram = c.transpose() * c;
        gram.diagonal().array() += epsilon;
        Eigen::LDLT<Matrix> ldlt(gram);
        if (ldlt.info() != Eigen::Success)
            throw NumericError("closed-form W refresh: singular Gram matrix");
        return Matrix(ldlt.solve(c.transpose() * state.codes));
    };
    return {solve(state.c1), solve(state.c2)};
}

Matrix update_codes(const TrainState& state, const TrainerConfig& cfg) {
    Matrix u = cfg.lambda * (state.c1 * state.w1 + state.c2 * state.w2);
    return u.unaryExpr([](double v) { return sign_pm1(v); });
}

Matrix fit_category(const Matrix& features, const AttributeMatrix& attrs, double epsilon) {
    const Matrix& a = attrs.vectors;
    Matrix gram = a * a.transpose();  // c x c
    gram.diagonal().array() += epsilon;
    Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw NumericError("category fit: singular attribute Gram matrix");
    // C = F A^T (A A^T + eps I)^{-1}; solve the transposed system
    return ldlt.solve(a * features.transpose()).transpose();
}

namespace {

struct MinibatchPlan {
    std::vector<int> order;
    int steps = 0;
    int batch_size = 0;
    int cursor = 0;

    std::vector<int> next(std::mt19937_64& rng) {
        std::vector<int> batch;
        int n = (int)order.size();
        for (int k = 0; k < std::min(batch_size, n); ++k) {
            if (cursor == n) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        return batch;
    }
};

void check_finite(const LossBreakdown& loss, int epoch) {
    if (!std::isfinite(loss.total))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
}

}  // namespace

TrainResult train(const CrossModalDataset& ds, const ScenarioSplit& split,
                  const SimilarityMatrices& sims, const EncoderConfig& enc_cfg1,
                  const EncoderConfig& enc_cfg2, const TrainerConfig& cfg) {
    cfg.validate();
    const auto& train_idx = split.train_indices;
    int nt = (int)train_idx.size();
    if (nt == 0) throw ConfigError("train: empty training set");
    if (sims.s11.rows() != nt) throw ShapeError("train: similarity size != training size");
    int d = (int)ds.attributes.vectors.cols();
    int c = (int)ds.attributes.vectors.rows();
    if (enc_cfg1.output_dim != d || enc_cfg2.output_dim != d)
        throw ShapeError("train: encoder output dim must equal attribute dim");

    Matrix x1(nt, ds.modality1.features.cols()), x2(nt, ds.modality2.features.cols());
    for (int k = 0; k < nt; ++k) {
        x1.row(k) = ds.modality1.features.row(train_idx[k]);
        x2.row(k) = ds.modality2.features.row(train_idx[k]);
    }

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    result.encoder1 = init_params(enc_cfg1);
    result.encoder2 = init_params(enc_cfg2);
    TrainState& st = result.state;

    st.f1 = forward(result.encoder1, x1, false).first;
    st.f2 = forward(result.encoder2, x2, false).first;
    st.c1 = fit_category(st.f1, ds.attributes);
    st.c2 = fit_category(st.f2, ds.attributes);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double wscale = 1.0 / std::sqrt((double)c);
    st.w1.resize(c, cfg.bits);
    st.w2.resize(c, cfg.bits);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < cfg.bits; ++j) {
            st.w1(i, j) = unif(rng) * wscale;
            st.w2(i, j) = unif(rng) * wscale;
        }
    st.codes = update_codes(st, cfg);

    st.history.push_back(total_loss(st, sims, ds.attributes, cfg));
    check_finite(st.history.back(), 0);
    if (cfg.iterations == 0) return result;

    MinibatchPlan plan;
    plan.order.resize(nt);
    std::iota(plan.order.begin(), plan.order.end(), 0);
    std::shuffle(plan.order.begin(), plan.order.end(), rng);
    plan.batch_size = std::min(cfg.batch_size, nt);
    plan.steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                                         : (nt + plan.batch_size - 1) / plan.batch_size;

    double lr = cfg.learning_rate;

    auto refresh_batch = [&](const std::vector<int>& batch, ForwardCache& cache1,
                             ForwardCache& cache2) {
        Matrix xb1 = select_rows(x1, batch), xb2 = select_rows(x2, batch);
        auto [o1, c1cache] = forward(result.encoder1, xb1, true, &rng);
        auto [o2, c2cache] = forward(result.encoder2, xb2, true, &rng);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            st.f1.row(batch[k]) = o1.row((Eigen::Index)k);
            st.f2.row(batch[k]) = o2.row((Eigen::Index)k);
        }
        cache1 = std::move(c1cache);
        cache2 = std::move(c2cache);
    };

    auto encoder_step = [&](const std::vector<int>& batch, const ForwardCache& cache1,
                            const ForwardCache& cache2, const TrainerConfig& grad_cfg) {
        auto [df1, df2] = grad_features(st, sims, ds.attributes, grad_cfg, batch);
        sgd_step(result.encoder1, backward(result.encoder1, cache1, df1), lr);
        sgd_step(result.encoder2, backward(result.encoder2, cache2, df2), lr);
        if (cfg.exact_f) {
            st.f1 = forward(result.encoder1, x1, false).first;
            st.f2 = forward(result.encoder2, x2, false).first;
        }
    };

    auto category_step = [&](const std::vector<int>& batch) {
        auto [dc1, dc2] = grad_category(st, ds.attributes, cfg, batch);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            st.c1.row(batch[k]) -= lr * dc1.row((Eigen::Index)k);
            st.c2.row(batch[k]) -= lr * dc2.row((Eigen::Index)k);
        }
    };

    auto projection_step = [&]() {
        if (cfg.closed_form_w) return;  // refreshed once per epoch instead
        auto [dw1, dw2] = grad_projection(st, cfg);
        st.w1 -= lr * dw1;
        st.w2 -= lr * dw2;
    };

    if (cfg.ablation == Ablation::nJ) {
        // Staged optimization: encoders on the similarity terms alone, then
        // category/projection fitting, then a single sign update.
        TrainerConfig sim_only = cfg;
        sim_only.alpha = 0.0;
        for (int epoch = 1; epoch <= cfg.iterations; ++epoch) {
            for (int s = 0; s < plan.steps; ++s) {
                auto batch = plan.next(rng);
                ForwardCache cache1, cache2;
                refresh_batch(batch, cache1, cache2);
                encoder_step(batch, cache1, cache2, sim_only);
            }
            st.iteration = epoch;
            st.history.push_back(total_loss(st, sims, ds.attributes, cfg));
            check_finite(st.history.back(), epoch);
        }
        st.f1 = forward(result.encoder1, x1, false).first;
        st.f2 = forward(result.encoder2, x2, false).first;
        st.c1 = fit_category(st.f1, ds.attributes);
        st.c2 = fit_category(st.f2, ds.attributes);
        st.codes = update_codes(st, cfg);
        for (int epoch = 1; epoch <= cfg.iterations; ++epoch) {
            for (int s = 0; s < plan.steps; ++s) {
                auto batch = plan.next(rng);
                category_step(batch);
                projection_step();
            }
            if (cfg.closed_form_w) {
                auto [w1, w2] = closed_form_projection(st);
                st.w1 = std::move(w1);
                st.w2 = std::move(w2);
            }
            st.iteration = cfg.iterations + epoch;
            st.history.push_back(total_loss(st, sims, ds.attributes, cfg));
            check_finite(st.history.back(), st.iteration);
        }
        st.codes = update_codes(st, cfg);
        st.history.push_back(total_loss(st, sims, ds.attributes, cfg));
        return result;
    }

    for (int epoch = 1; epoch <= cfg.iterations; ++epoch) {
        for (int s = 0; s < plan.steps; ++s) {
            auto batch = plan.next(rng);
            ForwardCache cache1, cache2;
            refresh_batch(batch, cache1, cache2);
            category_step(batch);
            projection_step();
            encoder_step(batch, cache1, cache2, cfg);
        }
        if (cfg.closed_form_w) {
            auto [w1, w2] = closed_form_projection(st);
            st.w1 = std::move(w1);
            st.w2 = std::move(w2);
        }
        st.codes = update_codes(st, cfg);
        st.iteration = epoch;
        st.history.push_back(total_loss(st, sims, ds.attributes, cfg));
        check_finite(st.history.back(), epoch);
    }
    return result;
}

}  // namespace czhash
