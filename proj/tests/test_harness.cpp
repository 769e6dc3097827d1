#include "czhash/harness.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

using namespace czhash;

namespace {

ExperimentConfig tiny_profile() {
    ExperimentConfig cfg = default_profile();
    cfg.synthetic.n = 80;
    cfg.synthetic.c = 5;
    cfg.synthetic.d = 4;
    cfg.synthetic.d1 = 8;
    cfg.synthetic.d2 = 6;
    cfg.hidden_dims = {12};
    cfg.trainer.iterations = 10;
    cfg.trainer.batch_size = 16;
    cfg.bits_list = {8};
    cfg.repeats = 2;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("config files parse with overrides winning") {
    TempDir tmp;
    std::ofstream(tmp.path / "cfg.txt") << "# comment\n"
                                        << "n = 300\n"
                                        << "scenario = C\n"
                                        << "alpha = 0.25\n"
                                        << "bits = 8,16\n"
                                        << "hidden_dims = 32,16\n"
                                        << "closed_form_w = false\n";
    auto cfg = parse_experiment_config(tmp.path / "cfg.txt", {{"alpha", "0.5"}, {"repeats", "3"}});
    CHECK(cfg.synthetic.n == 300);
    CHECK(cfg.scenario == Scenario::C);
    CHECK(cfg.trainer.alpha == 0.5);  // override wins
    CHECK(cfg.repeats == 3);
    CHECK(cfg.bits_list == std::vector<int>{8, 16});
    CHECK(cfg.hidden_dims == std::vector<int>{32, 16});
    CHECK(cfg.trainer.closed_form_w == false);
}

TEST_CASE("config parsing rejects unknown keys, bad values and bad syntax") {
    TempDir tmp;
    CHECK_THROWS_AS(parse_experiment_config(std::nullopt, {{"frobnicate", "1"}}), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(std::nullopt, {{"alpha", "many"}}), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(std::nullopt, {{"repeats", "0"}}), ConfigError);
    std::ofstream(tmp.path / "bad.txt") << "no equals sign here\n";
    CHECK_THROWS_AS(parse_experiment_config(tmp.path / "bad.txt", {}), ParseError);
    CHECK_THROWS_AS(parse_experiment_config(tmp.path / "missing.txt", {}), ParseError);
}

TEST_CASE("resolved configs round-trip through the parser") {
    ExperimentConfig cfg = tiny_profile();
    cfg.scenario = Scenario::D;
    cfg.trainer.alpha = 0.125;
    cfg.trainer.similarity_scale = SimilarityScale::plus_minus;
    TempDir tmp;
    write_resolved_config(cfg, tmp.path / "resolved.txt");
    auto back = parse_experiment_config(tmp.path / "resolved.txt", {});
    CHECK(back.synthetic.n == cfg.synthetic.n);
    CHECK(back.scenario == cfg.scenario);
    CHECK(back.trainer.alpha == cfg.trainer.alpha);
    CHECK(back.trainer.similarity_scale == SimilarityScale::plus_minus);
    CHECK(back.hidden_dims == cfg.hidden_dims);
    CHECK(back.bits_list == cfg.bits_list);
    CHECK(back.seed == cfg.seed);
}

TEST_CASE("checkpoints round-trip through JSON") {
    auto cfg = tiny_profile();
    auto ds = obtain_dataset(cfg);
    auto run = run_single(ds, cfg, 8, 0);
    auto ck = make_checkpoint(run.result, cfg.trainer, cfg.scenario);
    TempDir tmp;
    save_checkpoint(ck, tmp.path / "ck.json");
    auto back = load_checkpoint(tmp.path / "ck.json");
    CHECK(back.scenario == ck.scenario);
    CHECK(back.w1 == ck.w1);
    CHECK(back.w2 == ck.w2);
    CHECK(back.c1 == ck.c1);
    CHECK(back.codes == ck.codes);
    CHECK(back.encoder1.weights[0] == ck.encoder1.weights[0]);
    CHECK(back.trainer.alpha == ck.trainer.alpha);

    std::ofstream(tmp.path / "junk.json") << "{\"format\": \"something else\"}\n";
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "junk.json"), ParseError);
}

TEST_CASE("run_single trains, evaluates both directions, and is deterministic") {
    auto cfg = tiny_profile();
    auto ds = obtain_dataset(cfg);
    auto a = run_single(ds, cfg, 8, 1);
    REQUIRE(a.reports.size() == 2);
    CHECK(a.reports[0].direction == "img_to_txt");
    CHECK(a.reports[1].direction == "txt_to_img");
    CHECK(a.reports[0].bits == 8);
    CHECK(a.reports[0].map >= 0.0);
    CHECK(a.reports[0].map <= 1.0);
    CHECK(!a.reports[0].per_query_ap.empty());

    auto b = run_single(ds, cfg, 8, 1);
    CHECK(a.reports[0].map == b.reports[0].map);
    CHECK(a.reports[1].map == b.reports[1].map);
    CHECK(a.result.state.codes == b.result.state.codes);

    // a different repeat draws a different split
    auto c = run_single(ds, cfg, 8, 0);
    CHECK(c.split.test_indices != a.split.test_indices);
}

TEST_CASE("run_experiment aggregates repeats into per-bits mean rows") {
    auto cfg = tiny_profile();
    auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 2);  // one bits setting, two directions
    CHECK(rows[0].direction == "img_to_txt");
    CHECK(rows[1].direction == "txt_to_img");
    CHECK(rows[0].bits == 8);
    CHECK(rows[0].scenario == "A");
    CHECK(rows[0].variant == "full");

    // the mean equals the average of the individual runs
    auto ds = obtain_dataset(cfg);
    double expect = 0.0;
    for (int rep = 0; rep < cfg.repeats; ++rep)
        expect += run_single(ds, cfg, 8, rep).reports[0].map;
    expect /= cfg.repeats;
    CHECK(rows[0].map == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("results are identical across thread cap settings") {
    auto cfg = tiny_profile();
    cfg.bits_list = {4, 8};

    setenv("CZHASH_THREADS", "1", 1);
    auto serial = run_experiment(cfg);
    setenv("CZHASH_THREADS", "4", 1);
    auto parallel = run_experiment(cfg);
    unsetenv("CZHASH_THREADS");

    REQUIRE(serial.size() == parallel.size());
    TempDir tmp;
    write_results_csv(serial, tmp.path / "serial.csv");
    write_results_csv(parallel, tmp.path / "parallel.csv");
    CHECK(read_file(tmp.path / "serial.csv") == read_file(tmp.path / "parallel.csv"));
}

TEST_CASE("results CSV has a fixed header and formatting") {
    std::vector<ResultRow> rows{{"C", "img_to_txt", 16, 0.5, "full"},
                                {"C", "txt_to_img", 16, 1.0 / 3.0, "nFS"}};
    TempDir tmp;
    write_results_csv(rows, tmp.path / "r.csv");
    CHECK(read_file(tmp.path / "r.csv") ==
          "scenario,direction,bits,map,variant\n"
          "C,img_to_txt,16,0.500000,full\n"
          "C,txt_to_img,16,0.333333,nFS\n");
}

TEST_CASE("sweeps tag rows with the swept value and reject unknown parameters") {
    auto cfg = tiny_profile();
    cfg.repeats = 1;
    cfg.trainer.iterations = 5;
    auto rows = run_sweep(cfg, "alpha", {"0.5", "2"});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].variant == "alpha=0.5");
    CHECK(rows[2].variant == "alpha=2");
    CHECK_THROWS_AS(run_sweep(cfg, "learning_rate", {"0.1"}), ConfigError);
}

TEST_CASE("ablation runs cover all four variants") {
    auto cfg = tiny_profile();
    cfg.repeats = 1;
    cfg.trainer.iterations = 5;
    cfg.scenario = Scenario::C;
    auto rows = run_ablations(cfg);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].variant == "full");
    CHECK(rows[2].variant == "nFS");
    CHECK(rows[4].variant == "nLS");
    CHECK(rows[6].variant == "nJ");
    for (const auto& r : rows) CHECK(r.scenario == "C");
}

TEST_CASE("train logs write one JSON line per recorded epoch") {
    auto cfg = tiny_profile();
    auto ds = obtain_dataset(cfg);
    auto run = run_single(ds, cfg, 8, 0);
    TempDir tmp;
    write_train_log(run.result.state, tmp.path / "log.jsonl");
    auto text = read_file(tmp.path / "log.jsonl");
    std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == run.result.state.history.size());
    CHECK(text.find("\"total\"") != std::string::npos);
}

TEST_CASE("obtain_dataset prefers an on-disk dataset when given one") {
    auto cfg = tiny_profile();
    auto ds = obtain_dataset(cfg);
    TempDir tmp;
    save_dataset(ds, tmp.path / "ds");
    cfg.dataset_path = (tmp.path / "ds").string();
    cfg.synthetic.n = 9999;  // ignored when loading from disk
    auto loaded = obtain_dataset(cfg);
    CHECK(loaded.n == ds.n);
    CHECK(loaded.modality1.features.isApprox(ds.modality1.features, 0.0));
}
