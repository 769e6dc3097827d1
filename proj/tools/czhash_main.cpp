#include "czhash/harness.hpp"
#include "czhash/serial.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace czhash;

namespace {

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string config_file;
    std::vector<std::string> sets;  // key=value overrides
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_file, "flat key=value config file");
    cmd->add_option("--set", opts.sets, "config override, key=value (flags win over file)");
}

ExperimentConfig resolve_config(const CommonOpts& opts,
                                const std::map<std::string, std::string>& extra) {
    std::map<std::string, std::string> overrides;
    for (const auto& kv : opts.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    for (const auto& [k, v] : extra) overrides[k] = v;
    std::optional<fs::path> file;
    if (!opts.config_file.empty()) file = opts.config_file;
    return parse_experiment_config(file, overrides);
}

void emit_results(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows,
                  const std::string& name) {
    fs::create_directories(cfg.output_dir);
    write_results_csv(rows, fs::path(cfg.output_dir) / name);
    write_resolved_config(cfg, fs::path(cfg.output_dir) / "resolved.cfg");
    for (const auto& r : rows)
        std::cout << r.scenario << " " << r.direction << " b=" << r.bits << " " << r.variant
                  << " map=" << r.map << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"czhash: cross-modal zero-shot hashing experiments"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset directory");
    CommonOpts gen_opts;
    std::string gen_out;
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    // split
    auto* spl = app.add_subcommand("split", "derive a scenario split and save it as JSON");
    CommonOpts spl_opts;
    std::string spl_data, spl_out;
    add_common(spl, spl_opts);
    spl->add_option("--data", spl_data, "dataset directory")->required();
    spl->add_option("--out", spl_out, "output split JSON")->required();

    // train
    auto* trn = app.add_subcommand("train", "build similarities and train one model");
    CommonOpts trn_opts;
    std::string trn_data, trn_split, trn_out;
    bool dump_similarity = false;
    add_common(trn, trn_opts);
    trn->add_option("--data", trn_data, "dataset directory (omit to use synthetic config)");
    trn->add_option("--split", trn_split, "split JSON (omit to derive from config)");
    trn->add_option("--out", trn_out, "output directory")->required();
    trn->add_flag("--dump-similarity", dump_similarity, "export S11/S22/S12 as CSV");

    // encode
    auto* enc = app.add_subcommand("encode", "hash instances of one modality");
    std::string enc_ck, enc_data, enc_out, enc_packed;
    int enc_modality = 1;
    enc->add_option("--checkpoint", enc_ck)->required();
    enc->add_option("--data", enc_data, "dataset directory")->required();
    enc->add_option("--modality", enc_modality)->check(CLI::Range(1, 2));
    enc->add_option("--out", enc_out, "text code output")->required();
    enc->add_option("--packed", enc_packed, "also write packed binary codes");

    // retrieve
    auto* ret = app.add_subcommand("retrieve", "rank database codes for each query code");
    std::string ret_db, ret_query;
    int ret_k = -1;
    ret->add_option("--db", ret_db, "database codes (text)")->required();
    ret->add_option("--queries", ret_query, "query codes (text)")->required();
    ret->add_option("--k", ret_k, "ranking depth (default: full)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "train/evaluate over bits x repeats, or score a checkpoint");
    CommonOpts ev_opts;
    std::string ev_ck, ev_data, ev_split;
    add_common(ev, ev_opts);
    ev->add_option("--checkpoint", ev_ck, "score this checkpoint instead of training");
    ev->add_option("--data", ev_data, "dataset directory (checkpoint mode)");
    ev->add_option("--split", ev_split, "split JSON (checkpoint mode)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "evaluate across one parameter's values");
    CommonOpts sw_opts;
    std::string sw_param;
    std::vector<std::string> sw_values;
    add_common(sw, sw_opts);
    sw->add_option("--param", sw_param, "alpha|beta|bits|mask_fraction|seen_fraction")->required();
    sw->add_option("--values", sw_values, "values to sweep")->required();

    // ablate
    auto* ab = app.add_subcommand("ablate", "run full, nFS, nLS and nJ variants");
    CommonOpts ab_opts;
    add_common(ab, ab_opts);

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        ExperimentConfig cfg = resolve_config(gen_opts, {});
        save_dataset(obtain_dataset(cfg), gen_out);
        std::cout << "wrote dataset to " << gen_out << "\n";
        return 0;
    }

    if (spl->parsed()) {
        ExperimentConfig cfg = resolve_config(spl_opts, {{"dataset", spl_data}});
        CrossModalDataset ds = load_dataset(spl_data);
        auto split = make_split(ds, cfg.scenario, cfg.seen_fraction,
                                cfg.scenario == Scenario::C || cfg.scenario == Scenario::D
                                    ? cfg.mask_fraction
                                    : 0.0,
                                cfg.seed);
        save_split(split, spl_out);
        std::cout << "scenario " << to_string(split.scenario) << ": "
                  << split.train_indices.size() << " train, " << split.test_indices.size()
                  << " test, " << split.masked_indices.size() << " masked\n";
        return 0;
    }

    if (trn->parsed()) {
        std::map<std::string, std::string> extra;
        if (!trn_data.empty()) extra["dataset"] = trn_data;
        ExperimentConfig cfg = resolve_config(trn_opts, extra);
        CrossModalDataset ds = obtain_dataset(cfg);
        ScenarioSplit split =
            trn_split.empty()
                ? make_split(ds, cfg.scenario, cfg.seen_fraction,
                             cfg.scenario == Scenario::C || cfg.scenario == Scenario::D
                                 ? cfg.mask_fraction
                                 : 0.0,
                             cfg.seed)
                : load_split(trn_split);
        SimilarityMatrices sims = build_all(ds, split, similarity_mode_for(cfg.trainer.ablation));
        fs::create_directories(trn_out);
        if (dump_similarity) dump_similarity_csv(sims, fs::path(trn_out) / "similarity");

        TrainerConfig tc = cfg.trainer;
        tc.bits = cfg.bits_list.front();
        tc.seed = cfg.seed;
        EncoderConfig e1, e2;
        e1.input_dim = (int)ds.modality1.features.cols();
        e2.input_dim = (int)ds.modality2.features.cols();
        e1.output_dim = e2.output_dim = (int)ds.attributes.vectors.cols();
        e1.hidden_dims = e2.hidden_dims = cfg.hidden_dims;
        e1.dropout_rate = e2.dropout_rate = cfg.dropout_rate;
        e1.init_scale = e2.init_scale = cfg.init_scale;
        e1.seed = cfg.seed + 29;
        e2.seed = cfg.seed + 31;

        TrainResult result = train(ds, split, sims, e1, e2, tc);
        save_checkpoint(make_checkpoint(result, tc, cfg.scenario),
                        fs::path(trn_out) / "checkpoint.json");
        save_split(split, fs::path(trn_out) / "split.json");
        write_train_log(result.state, fs::path(trn_out) / "train_log.jsonl");
        write_resolved_config(cfg, fs::path(trn_out) / "resolved.cfg");
        std::cout << "ablation=" << to_string(tc.ablation) << " epochs="
                  << result.state.iteration << " initial_loss="
                  << result.state.history.front().total
                  << " final_loss=" << result.state.history.back().total << "\n";
        return 0;
    }

    if (enc->parsed()) {
        Checkpoint ck = load_checkpoint(enc_ck);
        CrossModalDataset ds = load_dataset(enc_data);
        const Matrix& x = enc_modality == 1 ? ds.modality1.features : ds.modality2.features;
        Matrix codes = encode_batch(enc_modality == 1 ? ck.encoder1 : ck.encoder2,
                                    ds.attributes, enc_modality == 1 ? ck.w1 : ck.w2, x);
        save_codes_text(codes, enc_out);
        if (!enc_packed.empty()) save_codes_packed(pack_codes(codes), enc_packed);
        std::cout << "encoded " << codes.rows() << " instances at " << codes.cols()
                  << " bits\n";
        return 0;
    }

    if (ret->parsed()) {
        HashCodes db = pack_codes(load_codes_text(ret_db));
        Matrix queries = load_codes_text(ret_query);
        std::vector<int> ids((int)db.codes.rows());
        std::iota(ids.begin(), ids.end(), 0);
        HammingIndex index = build_index(db, ids);
        for (Eigen::Index q = 0; q < queries.rows(); ++q) {
            auto ranked = retrieve(index, pack_row(queries.row(q).transpose()), ret_k);
            for (std::size_t i = 0; i < ranked.size(); ++i)
                std::cout << (i ? " " : "") << ranked[i];
            std::cout << "\n";
        }
        return 0;
    }

    if (ev->parsed()) {
        if (!ev_ck.empty()) {
            if (ev_data.empty() || ev_split.empty())
                throw ConfigError("checkpoint evaluation needs --data and --split");
            Checkpoint ck = load_checkpoint(ev_ck);
            CrossModalDataset ds = load_dataset(ev_data);
            ScenarioSplit split = load_split(ev_split);
            auto reports = evaluate_model(ds, split, ck);
            for (const auto& r : reports)
                std::cout << r.scenario << " " << r.direction << " b=" << r.bits
                          << " map=" << r.map << "\n";
            return 0;
        }
        ExperimentConfig cfg = resolve_config(ev_opts, {});
        emit_results(cfg, run_experiment(cfg), "results.csv");
        return 0;
    }

    if (sw->parsed()) {
        ExperimentConfig cfg = resolve_config(sw_opts, {});
        emit_results(cfg, run_sweep(cfg, sw_param, sw_values), "sweep.csv");
        return 0;
    }

    if (ab->parsed()) {
        ExperimentConfig cfg = resolve_config(ab_opts, {});
        emit_results(cfg, run_ablations(cfg), "ablations.csv");
        return 0;
    }

    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
