#include "czhash/harness.hpp"

#include "czhash/serial.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace czhash {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
    synthetic.validate();
    trainer.validate();
    for (int b : bits_list)
        if (b < 1) throw ConfigError("bits values must be >= 1");
    if (bits_list.empty()) throw ConfigError("bits list must be non-empty");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (dropout_rate < 0 || dropout_rate >= 1)
        throw ConfigError("dropout_rate must be in [0,1)");
}

ExperimentConfig default_profile() {
    ExperimentConfig cfg;
    cfg.synthetic.n = 1000;
    cfg.synthetic.c = 10;
    cfg.synthetic.d = 16;
    cfg.trainer.bits = 16;
    cfg.trainer.iterations = 200;
    cfg.trainer.closed_form_w = true;
    // the loss sums n_train^2 similarity residuals, so the step size must
    // shrink well below the small-problem default to keep SGD stable here
    cfg.trainer.learning_rate = 1e-4;
    cfg.bits_list = {16};
    cfg.repeats = 10;
    return cfg;
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoi(tok));
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "dataset") cfg.dataset_path = value;
        else if (key == "n") cfg.synthetic.n = std::stoi(value);
        else if (key == "c") cfg.synthetic.c = std::stoi(value);
        else if (key == "d") cfg.synthetic.d = std::stoi(value);
        else if (key == "d1") cfg.synthetic.d1 = std::stoi(value);
        else if (key == "d2") cfg.synthetic.d2 = std::stoi(value);
        else if (key == "labels_per_instance") cfg.synthetic.labels_per_instance = std::stoi(value);
        else if (key == "cluster_noise") cfg.synthetic.cluster_noise = std::stod(value);
        else if (key == "label_space_overlap") cfg.synthetic.label_space_overlap = std::stod(value);
        else if (key == "scenario") cfg.scenario = scenario_from_string(value);
        else if (key == "seen_fraction") cfg.seen_fraction = std::stod(value);
        else if (key == "mask_fraction") cfg.mask_fraction = std::stod(value);
        else if (key == "alpha") cfg.trainer.alpha = std::stod(value);
        else if (key == "beta") cfg.trainer.beta = std::stod(value);
        else if (key == "lambda") cfg.trainer.lambda = std::stod(value);
        else if (key == "batch_size") cfg.trainer.batch_size = std::stoi(value);
        else if (key == "iterations" || key == "epochs") cfg.trainer.iterations = std::stoi(value);
        else if (key == "steps_per_epoch") cfg.trainer.steps_per_epoch = std::stoi(value);
        else if (key == "learning_rate") cfg.trainer.learning_rate = std::stod(value);
        else if (key == "similarity_scale")
            cfg.trainer.similarity_scale = value == "plus_minus" ? SimilarityScale::plus_minus
                                                                 : SimilarityScale::unit;
        else if (key == "ablation") cfg.trainer.ablation = ablation_from_string(value);
        else if (key == "closed_form_w") cfg.trainer.closed_form_w = value == "true" || value == "1";
        else if (key == "exact_f") cfg.trainer.exact_f = value == "true" || value == "1";
        else if (key == "hidden_dims") cfg.hidden_dims = parse_int_list(value);
        else if (key == "dropout_rate") cfg.dropout_rate = std::stod(value);
        else if (key == "init_scale") cfg.init_scale = std::stod(value);
        else if (key == "bits") cfg.bits_list = parse_int_list(value);
        else if (key == "repeats") cfg.repeats = std::stoi(value);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw ConfigError("unknown config key '" + key + "'");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_experiment_config(
    const std::optional<fs::path>& file,
    const std::map<std::string, std::string>& overrides) {
    ExperimentConfig cfg = default_profile();
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ParseError("cannot open config " + file->string());
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ParseError(file->string() + ":" + std::to_string(lineno) +
                                 ": expected 'key = value'");
            apply_key(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
    }
    for (const auto& [k, v] : overrides) apply_key(cfg, k, v);
    cfg.validate();
    return cfg;
}

void write_resolved_config(const ExperimentConfig& cfg, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    out << "# czhash resolved config, tool version 1.0\n";
    out << "dataset = " << cfg.dataset_path << "\n";
    out << "n = " << cfg.synthetic.n << "\n";
    out << "c = " << cfg.synthetic.c << "\n";
    out << "d = " << cfg.synthetic.d << "\n";
    out << "d1 = " << cfg.synthetic.d1 << "\n";
    out << "d2 = " << cfg.synthetic.d2 << "\n";
    out << "labels_per_instance = " << cfg.synthetic.labels_per_instance << "\n";
    out << "cluster_noise = " << num(cfg.synthetic.cluster_noise) << "\n";
    out << "label_space_overlap = " << num(cfg.synthetic.label_space_overlap) << "\n";
    out << "scenario = " << to_string(cfg.scenario) << "\n";
    out << "seen_fraction = " << num(cfg.seen_fraction) << "\n";
    out << "mask_fraction = " << num(cfg.mask_fraction) << "\n";
    out << "alpha = " << num(cfg.trainer.alpha) << "\n";
    out << "beta = " << num(cfg.trainer.beta) << "\n";
    out << "lambda = " << num(cfg.trainer.lambda) << "\n";
    out << "batch_size = " << cfg.trainer.batch_size << "\n";
    out << "iterations = " << cfg.trainer.iterations << "\n";
    out << "steps_per_epoch = " << cfg.trainer.steps_per_epoch << "\n";
    out << "learning_rate = " << num(cfg.trainer.learning_rate) << "\n";
    out << "similarity_scale = "
        << (cfg.trainer.similarity_scale == SimilarityScale::plus_minus ? "plus_minus" : "unit")
        << "\n";
    out << "ablation = " << to_string(cfg.trainer.ablation) << "\n";
    out << "closed_form_w = " << (cfg.trainer.closed_form_w ? "true" : "false") << "\n";
    out << "exact_f = " << (cfg.trainer.exact_f ? "true" : "false") << "\n";
    out << "hidden_dims = " << join_ints(cfg.hidden_dims) << "\n";
    out << "dropout_rate = " << num(cfg.dropout_rate) << "\n";
    out << "init_scale = " << num(cfg.init_scale) << "\n";
    out << "bits = " << join_ints(cfg.bits_list) << "\n";
    out << "repeats = " << cfg.repeats << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";
    out << "seed = " << cfg.seed << "\n";
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
    if (!j.is_array() || j.empty()) throw ParseError("checkpoint: expected matrix");
    Matrix m((Eigen::Index)j.size(), (Eigen::Index)j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i)
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m((Eigen::Index)i, (Eigen::Index)k) = j[i][k].get<double>();
    return m;
}

json trainer_to_json(const TrainerConfig& cfg) {
    json j;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["lambda"] = cfg.lambda;
    j["bits"] = cfg.bits;
    j["batch_size"] = cfg.batch_size;
    j["iterations"] = cfg.iterations;
    j["steps_per_epoch"] = cfg.steps_per_epoch;
    j["learning_rate"] = cfg.learning_rate;
    j["similarity_scale"] =
        cfg.similarity_scale == SimilarityScale::plus_minus ? "plus_minus" : "unit";
    j["ablation"] = to_string(cfg.ablation);
    j["closed_form_w"] = cfg.closed_form_w;
    j["exact_f"] = cfg.exact_f;
    j["seed"] = cfg.seed;
    return j;
}

TrainerConfig trainer_from_json(const json& j) {
    TrainerConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.beta = j.at("beta").get<double>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.bits = j.at("bits").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.iterations = j.at("iterations").get<int>();
    cfg.steps_per_epoch = j.at("steps_per_epoch").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.similarity_scale = j.at("similarity_scale").get<std::string>() == "plus_minus"
                               ? SimilarityScale::plus_minus
                               : SimilarityScale::unit;
    cfg.ablation = ablation_from_string(j.at("ablation").get<std::string>());
    cfg.closed_form_w = j.at("closed_form_w").get<bool>();
    cfg.exact_f = j.at("exact_f").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const fs::path& file) {
    json j;
    j["format"] = "czhash-checkpoint v1";
    j["scenario"] = to_string(ck.scenario);
    j["trainer"] = trainer_to_json(ck.trainer);
    j["encoder1"] = encoder_to_json(ck.encoder1);
    j["encoder2"] = encoder_to_json(ck.encoder2);
    j["c1"] = matrix_to_json(ck.c1);
    j["c2"] = matrix_to_json(ck.c2);
    j["w1"] = matrix_to_json(ck.w1);
    j["w2"] = matrix_to_json(ck.w2);
    j["b"] = matrix_to_json(ck.codes);
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open checkpoint " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    if (j.value("format", "") != "czhash-checkpoint v1")
        throw ParseError(file.string() + ": not a czhash checkpoint");
    Checkpoint ck;
    try {
        ck.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        ck.trainer = trainer_from_json(j.at("trainer"));
        ck.encoder1 = encoder_from_json(j.at("encoder1"));
        ck.encoder2 = encoder_from_json(j.at("encoder2"));
        ck.c1 = matrix_from_json(j.at("c1"));
        ck.c2 = matrix_from_json(j.at("c2"));
        ck.w1 = matrix_from_json(j.at("w1"));
        ck.w2 = matrix_from_json(j.at("w2"));
        ck.codes = matrix_from_json(j.at("b"));
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    return ck;
}

Checkpoint make_checkpoint(const TrainResult& result, const TrainerConfig& cfg,
                           Scenario scenario) {
    Checkpoint ck;
    ck.encoder1 = result.encoder1;
    ck.encoder2 = result.encoder2;
    ck.c1 = result.state.c1;
    ck.c2 = result.state.c2;
    ck.w1 = result.state.w1;
    ck.w2 = result.state.w2;
    ck.codes = result.state.codes;
    ck.trainer = cfg;
    ck.scenario = scenario;
    return ck;
}

void write_train_log(const TrainState& state, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    for (std::size_t e = 0; e < state.history.size(); ++e) {
        const auto& l = state.history[e];
        json j;
        j["epoch"] = e;
        j["sim11"] = l.sim11;
        j["sim22"] = l.sim22;
        j["sim12"] = l.sim12;
        j["cat1"] = l.cat1;
        j["cat2"] = l.cat2;
        j["quant1"] = l.quant1;
        j["quant2"] = l.quant2;
        j["total"] = l.total;
        out << j.dump() << "\n";
    }
}

CrossModalDataset obtain_dataset(const ExperimentConfig& cfg) {
    if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
    SyntheticConfig sc = cfg.synthetic;
    sc.seed = cfg.seed;
    return generate_synthetic(sc);
}

namespace {

LabelSet union_labels(const CrossModalDataset& ds, int i) {
    LabelSet out = ds.modality1.label_sets[i];
    out.insert(ds.modality2.label_sets[i].begin(), ds.modality2.label_sets[i].end());
    return out;
}

Matrix select_rows(const Matrix& m, const std::vector<int>& rows) {
    Matrix out((Eigen::Index)rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row((Eigen::Index)k) = m.row(rows[k]);
    return out;
}

}  // namespace

std::vector<EvalReport> evaluate_model(const CrossModalDataset& ds, const ScenarioSplit& split,
                                       const Checkpoint& ck) {
    const auto& test = split.test_indices;
    if (test.empty()) throw ConfigError("evaluate: empty test set");

    Matrix codes1 = encode_batch(ck.encoder1, ds.attributes, ck.w1,
                                 select_rows(ds.modality1.features, test));
    Matrix codes2 = encode_batch(ck.encoder2, ds.attributes, ck.w2,
                                 select_rows(ds.modality2.features, test));

    std::vector<LabelSet> labels(test.size());
    for (std::size_t k = 0; k < test.size(); ++k) labels[k] = union_labels(ds, test[k]);

    auto run_direction = [&](const Matrix& query_codes, const Matrix& db_codes,
                             const std::string& direction) {
        HashCodes db = pack_codes(db_codes);
        std::vector<int> ids((int)test.size());
        std::iota(ids.begin(), ids.end(), 0);
        HammingIndex index = build_index(db, ids);

        std::vector<RelevanceJudgment> judgments;
        for (Eigen::Index q = 0; q < query_codes.rows(); ++q) {
            if (labels[(std::size_t)q].empty()) continue;
            auto ranked = retrieve(index, pack_row(query_codes.row(q).transpose()));
            std::vector<LabelSet> ranked_labels;
            ranked_labels.reserve(ranked.size());
            for (int id : ranked) ranked_labels.push_back(labels[(std::size_t)id]);
            judgments.push_back(judge_relevance(labels[(std::size_t)q], ranked_labels));
        }

        EvalReport report;
        report.direction = direction;
        report.bits = (int)query_codes.cols();
        report.scenario = to_string(split.scenario);
        report.map = map_score(judgments);
        for (const auto& jd : judgments)
            if (jd.t >= 1) report.per_query_ap.push_back(average_precision(jd.relevant, jd.t));
        for (int r : {10, 50, 100})
            if (r <= (int)test.size()) report.precision_at[r] = precision_at(judgments, r);
        return report;
    };

    return {run_direction(codes1, codes2, "img_to_txt"),
            run_direction(codes2, codes1, "txt_to_img")};
}

SingleRun run_single(const CrossModalDataset& ds, const ExperimentConfig& cfg, int bits,
                     int repeat) {
    std::uint64_t job_seed = cfg.seed * 1000003ull + (std::uint64_t)repeat;
    SingleRun run;
    run.split = make_split(ds, cfg.scenario, cfg.seen_fraction,
                           cfg.scenario == Scenario::C || cfg.scenario == Scenario::D
                               ? cfg.mask_fraction
                               : 0.0,
                           job_seed);
    SimilarityMatrices sims =
        build_all(ds, run.split, similarity_mode_for(cfg.trainer.ablation));

    TrainerConfig tc = cfg.trainer;
    tc.bits = bits;
    tc.seed = job_seed + 17;

    EncoderConfig e1, e2;
    e1.input_dim = (int)ds.modality1.features.cols();
    e2.input_dim = (int)ds.modality2.features.cols();
    e1.output_dim = e2.output_dim = (int)ds.attributes.vectors.cols();
    e1.hidden_dims = e2.hidden_dims = cfg.hidden_dims;
    e1.dropout_rate = e2.dropout_rate = cfg.dropout_rate;
    e1.init_scale = e2.init_scale = cfg.init_scale;
    e1.seed = job_seed + 29;
    e2.seed = job_seed + 31;

    run.result = train(ds, run.split, sims, e1, e2, tc);
    run.reports = evaluate_model(ds, run.split, make_checkpoint(run.result, tc, cfg.scenario));
    return run;
}

namespace {

int job_parallelism() {
    const char* env = std::getenv("CZHASH_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}

// Runs jobs indexed 0..count-1 with at most job_parallelism() threads.
void run_jobs(int count, const std::function<void(int)>& job) {
    int threads = std::min(job_parallelism(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) job(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    CrossModalDataset ds = obtain_dataset(cfg);

    struct JobOut {
        double map_12 = 0, map_21 = 0;
    };
    int nb = (int)cfg.bits_list.size();
    std::vector<JobOut> outs(nb * cfg.repeats);
    std::exception_ptr first_error;
    std::mutex err_mutex;

    run_jobs(nb * cfg.repeats, [&](int idx) {
        try {
            int bi = idx / cfg.repeats, rep = idx % cfg.repeats;
            SingleRun run = run_single(ds, cfg, cfg.bits_list[bi], rep);
            outs[idx].map_12 = run.reports[0].map;
            outs[idx].map_21 = run.reports[1].map;
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    std::vector<ResultRow> rows;
    for (int bi = 0; bi < nb; ++bi) {
        double m12 = 0, m21 = 0;
        for (int rep = 0; rep < cfg.repeats; ++rep) {
            m12 += outs[bi * cfg.repeats + rep].map_12;
            m21 += outs[bi * cfg.repeats + rep].map_21;
        }
        m12 /= cfg.repeats;
        m21 /= cfg.repeats;
        std::string variant = to_string(cfg.trainer.ablation);
        rows.push_back({to_string(cfg.scenario), "img_to_txt", cfg.bits_list[bi], m12, variant});
        rows.push_back({to_string(cfg.scenario), "txt_to_img", cfg.bits_list[bi], m21, variant});
    }
    return rows;
}

std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                 const std::vector<std::string>& values) {
    static const std::set<std::string> allowed = {"alpha", "beta", "bits", "mask_fraction",
                                                  "seen_fraction"};
    if (!allowed.count(param))
        throw ConfigError("sweep parameter must be one of alpha, beta, bits, mask_fraction, "
                          "seen_fraction");
    std::vector<ResultRow> rows;
    for (const auto& value : values) {
        ExperimentConfig c = cfg;  // shared seeds across values
        apply_key(c, param, value);
        c.validate();
        auto sub = run_experiment(c);
        for (auto& row : sub) {
            row.variant = param + "=" + value;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<ResultRow> run_ablations(const ExperimentConfig& cfg) {
    std::vector<ResultRow> rows;
    for (Ablation a : {Ablation::full, Ablation::nFS, Ablation::nLS, Ablation::nJ}) {
        ExperimentConfig c = cfg;
        c.trainer.ablation = a;
        auto sub = run_experiment(c);
        rows.insert(rows.end(), sub.begin(), sub.end());
    }
    return rows;
}

void write_results_csv(const std::vector<ResultRow>& rows, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    out << "scenario,direction,bits,map,variant\n";
    char buf[32];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.map);
        out << r.scenario << "," << r.direction << "," << r.bits << "," << buf << ","
            << r.variant << "\n";
    }
}

}  // namespace czhash
