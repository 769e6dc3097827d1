#include "czhash/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace czhash {

double jaccard(const LabelSet& a, const LabelSet& b) {
    if (a.empty() || b.empty())
        throw ConfigError("jaccard undefined for empty label sets");
    std::size_t inter = 0;
    for (const auto& lab : a) inter += b.count(lab);
    std::size_t uni = a.size() + b.size() - inter;
    return (double)inter / (double)uni;
}

double feature_similarity(const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y) {
    if (x.size() != y.size())
        throw ShapeError("feature_similarity: dimension mismatch");
    return 1.0 / (1.0 + (x - y).norm());
}

double intra_composite(double feat_sim, const LabelSet& a, const LabelSet& b) {
    if (a.empty() || b.empty()) return feat_sim;
    double j = jaccard(a, b);
    return feat_sim * (1.0 + (j - feat_sim));
}

double inter_composite(std::optional<double> jacc12, double s11_ij, double s22_ij) {
    double mean = 0.5 * (s11_ij + s22_ij);
    if (!jacc12) return mean;
    return *jacc12 * (1.0 + (mean - *jacc12));
}

SimilarityMatrices build_all(const CrossModalDataset& ds, const ScenarioSplit& split,
                             SimilarityMode mode) {
    const auto& train = split.train_indices;
    if (train.empty()) throw ConfigError("build_all: empty training set");
    int m = (int)train.size();

    std::vector<LabelSet> lab1(m), lab2(m);
    for (int k = 0; k < m; ++k) {
        lab1[k] = visible_labels(ds, split, 1, train[k]);
        lab2[k] = visible_labels(ds, split, 2, train[k]);
    }

    SimilarityMatrices sims;
    sims.s11.resize(m, m);
    sims.s22.resize(m, m);
    sims.s12.resize(m, m);

    auto intra_entry = [&](const Matrix& feats, const std::vector<LabelSet>& labs,
                           int i, int j) {
        switch (mode) {
            case SimilarityMode::label_only:
                return (!labs[i].empty() && !labs[j].empty()) ? jaccard(labs[i], labs[j]) : 0.0;
            case SimilarityMode::feature_only:
                return feature_similarity(feats.row(train[i]).transpose(),
                                          feats.row(train[j]).transpose());
            case SimilarityMode::composite:
                return intra_composite(feature_similarity(feats.row(train[i]).transpose(),
                                                          feats.row(train[j]).transpose()),
                                       labs[i], labs[j]);
        }
        return 0.0;
    };

    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            double v1 = intra_entry(ds.modality1.features, lab1, i, j);
            double v2 = intra_entry(ds.modality2.features, lab2, i, j);
            sims.s11(i, j) = sims.s11(j, i) = v1;
            sims.s22(i, j) = sims.s22(j, i) = v2;
        }
    }

    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            std::optional<double> j12;
            if (mode != SimilarityMode::feature_only && !lab1[i].empty() && !lab2[j].empty())
                j12 = jaccard(lab1[i], lab2[j]);
            if (mode == SimilarityMode::label_only)
                sims.s12(i, j) = j12.value_or(0.0);
            else
                sims.s12(i, j) = inter_composite(j12, sims.s11(i, j), sims.s22(i, j));
        }
    }
    return sims;
}

void dump_similarity_csv(const SimilarityMatrices& sims,
                         const std::filesystem::path& dir) {
    auto write = [&](const Matrix& m, const std::filesystem::path& file) {
        std::ofstream out(file);
        if (!out) throw ParseError("cannot write " + file.string());
        char buf[64];
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.12g", m(i, j));
                out << (j ? "," : "") << buf;
            }
            out << "\n";
        }
    };
    std::filesystem::create_directories(dir);
    write(sims.s11, dir / "s11.csv");
    write(sims.s22, dir / "s22.csv");
    write(sims.s12, dir / "s12.csv");
}

}  // namespace czhash
