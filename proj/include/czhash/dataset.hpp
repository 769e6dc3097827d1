#pragma once

#include "czhash/common.hpp"

#include <filesystem>
#include <optional>
#include <random>

namespace czhash {

// One modality of a paired corpus: a dense feature matrix plus per-instance
// label sets drawn from this modality's own label universe.
struct ModalityData {
    Matrix features;                       // n x d_v
    std::vector<LabelSet> label_sets;      // size n; empty set = unlabeled
    std::vector<std::string> label_universe;

    void validate() const;
};

// Per-category attribute vectors, indexed by the union of both modalities'
// label universes.
struct AttributeMatrix {
    std::vector<std::string> categories;  // size c, row order
    Matrix vectors;                       // c x d

    int index_of(const std::string& category) const;
    void validate() const;
};

struct CrossModalDataset {
    ModalityData modality1;
    ModalityData modality2;
    AttributeMatrix attributes;
    int n = 0;  // instance count (paired across modalities)
    int l = 0;  // labeled count; instances [0, l) carry at least one label
    int u = 0;  // unlabeled count, l + u = n

    void validate() const;
};

enum class Scenario { A, B, C, D };

Scenario scenario_from_string(const std::string& s);
std::string to_string(Scenario s);

struct ScenarioSplit {
    Scenario scenario = Scenario::A;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    LabelSet seen_categories_m1;
    LabelSet seen_categories_m2;
    std::vector<int> masked_indices;  // labels hidden for scenario C/D
    std::uint64_t seed = 0;

    bool is_masked(int index) const;
};

struct SyntheticConfig {
    int n = 1000;
    int c = 10;
    int d = 16;   // attribute / latent dimension
    int d1 = 32;  // modality-1 feature dimension
    int d2 = 24;
    int labels_per_instance = 1;
    double cluster_noise = 0.1;
    double label_space_overlap = 1.0;  // fraction of categories shared by both universes
    std::uint64_t seed = 0;

    void validate() const;
};

CrossModalDataset generate_synthetic(const SyntheticConfig& cfg);

// Directory format: meta.txt (header line "czhash-dataset v1" plus universe
// lines), m{1,2}.features.csv, m{1,2}.labels.txt, attributes.csv.
CrossModalDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const CrossModalDataset& ds, const std::filesystem::path& dir);

ScenarioSplit make_split(const CrossModalDataset& ds, Scenario scenario,
                         double seen_fraction, double mask_fraction,
                         std::uint64_t seed);

ScenarioSplit load_split(const std::filesystem::path& file);
void save_split(const ScenarioSplit& split, const std::filesystem::path& file);

// Labels of instance i in modality v (1 or 2) as the trainer may see them:
// restricted to that modality's seen categories and emptied when masked.
LabelSet visible_labels(const CrossModalDataset& ds, const ScenarioSplit& split,
                        int modality, int index);

}  // namespace czhash
