#pragma once

#include "czhash/dataset.hpp"

#include <optional>

namespace czhash {

// Composite similarity over the training set. Row/column k corresponds to
// split.train_indices[k]. s12(i,j) pairs modality-1 instance i with
// modality-2 instance j and is not symmetrized.
struct SimilarityMatrices {
    Matrix s11, s22, s12;
};

enum class SimilarityMode {
    composite,     // feature similarity boosted by label Jaccard
    label_only,    // Jaccard where both sides labeled, 0 otherwise (nFS)
    feature_only,  // ignore labels entirely (nLS)
};

// |a∩b| / |a∪b|. Both sets must be non-empty; callers branch on emptiness
// before calling.
double jaccard(const LabelSet& a, const LabelSet& b);

// 1 / (1 + ||x - y||_2)
double feature_similarity(const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y);

// Within-modality composite: feat_sim * (1 + jaccard - feat_sim) when both
// instances are labeled, feat_sim otherwise.
double intra_composite(double feat_sim, const LabelSet& a, const LabelSet& b);

// Cross-modality composite: jacc12 * (1 + mean(s11,s22) - jacc12) when both
// sides are labeled (jacc12 present), the plain mean otherwise.
double inter_composite(std::optional<double> jacc12, double s11_ij, double s22_ij);

SimilarityMatrices build_all(const CrossModalDataset& ds, const ScenarioSplit& split,
                             SimilarityMode mode = SimilarityMode::composite);

void dump_similarity_csv(const SimilarityMatrices& sims,
                         const std::filesystem::path& dir);

}  // namespace czhash
