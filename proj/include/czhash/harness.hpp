#pragma once

#include "czhash/codec.hpp"
#include "czhash/eval.hpp"
#include "czhash/trainer.hpp"

#include <map>
#include <optional>

namespace czhash {

struct ExperimentConfig {
    std::string dataset_path;  // empty: generate synthetically
    SyntheticConfig synthetic;
    Scenario scenario = Scenario::A;
    double seen_fraction = 0.8;
    double mask_fraction = 0.7;  // applied in scenarios C and D
    TrainerConfig trainer;
    std::vector<int> hidden_dims{64};
    double dropout_rate = 0.5;
    double init_scale = 1.0;
    std::vector<int> bits_list{16, 32, 64, 128};
    int repeats = 10;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    void validate() const;
};

// Desk-scale profile: completes the full scenario suite in minutes.
ExperimentConfig default_profile();

// Flat "key = value" config file; unknown keys are rejected. `overrides`
// wins over file contents (CLI flags).
ExperimentConfig parse_experiment_config(
    const std::optional<std::filesystem::path>& file,
    const std::map<std::string, std::string>& overrides);

void write_resolved_config(const ExperimentConfig& cfg, const std::filesystem::path& file);

struct Checkpoint {
    EncoderParams encoder1, encoder2;
    Matrix c1, c2, w1, w2, codes;
    TrainerConfig trainer;
    Scenario scenario = Scenario::A;
};

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);
Checkpoint make_checkpoint(const TrainResult& result, const TrainerConfig& cfg,
                           Scenario scenario);

void write_train_log(const TrainState& state, const std::filesystem::path& file);

CrossModalDataset obtain_dataset(const ExperimentConfig& cfg);

// Both retrieval directions for one trained model on the split's test set.
// Relevance uses true (pre-masking) labels, union semantics across modalities.
std::vector<EvalReport> evaluate_model(const CrossModalDataset& ds, const ScenarioSplit& split,
                                       const Checkpoint& ck);

struct ResultRow {
    std::string scenario;
    std::string direction;
    int bits = 0;
    double map = 0.0;
    std::string variant = "full";  // ablation tag, value tag for sweeps
};

// Train + evaluate over the bits x repeats grid; rows are mean MAP over
// repeats. Job parallelism is capped by the CZHASH_THREADS environment
// variable (default 1); results are deterministic regardless of the cap.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                 const std::vector<std::string>& values);

std::vector<ResultRow> run_ablations(const ExperimentConfig& cfg);

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& file);

// One full train+eval pass; split/trainer seeds derive from (cfg.seed, repeat).
struct SingleRun {
    ScenarioSplit split;
    TrainResult result;
    std::vector<EvalReport> reports;
};
SingleRun run_single(const CrossModalDataset& ds, const ExperimentConfig& cfg, int bits,
                     int repeat);

}  // namespace czhash
