// End-to-end acceptance checks. Each criterion prints exactly one
// "PASS criterion N" or "FAIL criterion N" line; the exit code is the
// number of failures.

#include "czhash/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace czhash;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool rel_close(double expected, double actual, double tol) {
    return std::abs(expected - actual) <= tol * std::max(1.0, std::abs(expected));
}

struct Criterion {
    int number;
    std::string title;
    std::function<bool(std::string&)> run;
};

// ---------------------------------------------------------------------------
// 1. All analytic gradients match central finite differences on toy problems.

bool check_gradient_oracle(std::string& detail) {
    auto start = Clock::now();
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double h = 1e-6, tol = 1e-4;
    int checked = 0;

    for (int trial = 0; trial < 20; ++trial) {
        int n = 2 + (int)(rng() % 7);  // <= 8
        int d = 1 + (int)(rng() % 4);
        int c = 1 + (int)(rng() % 3);
        int b = 1 + (int)(rng() % 4);

        TrainState st;
        auto fill = [&](Matrix& m, int r, int cc, auto& dist) {
            m.resize(r, cc);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < cc; ++j) m(i, j) = dist(rng);
        };
        SimilarityMatrices sims;
        AttributeMatrix attrs;
        TrainerConfig cfg;
        cfg.alpha = 0.5 + unit(rng);
        cfg.beta = 0.5 + unit(rng);
        cfg.bits = b;

        Matrix raw;
        fill(raw, n, n, unit);
        sims.s11 = 0.5 * (raw + raw.transpose());
        fill(raw, n, n, unit);
        sims.s22 = 0.5 * (raw + raw.transpose());
        fill(sims.s12, n, n, unit);
        fill(attrs.vectors, c, d, unif);
        for (int i = 0; i < c; ++i) attrs.categories.push_back(std::to_string(i));

        fill(st.f2, n, d, unif);
        fill(st.c1, n, c, unif);
        fill(st.c2, n, c, unif);
        fill(st.w1, c, b, unif);
        fill(st.w2, c, b, unif);
        fill(st.codes, n, b, unif);
        st.codes = st.codes.unaryExpr([](double v) { return sign_pm1(v); });

        // F1 flows through a small encoder so its parameter gradients are
        // exercised too
        EncoderConfig ec;
        ec.input_dim = 1 + (int)(rng() % 4);
        ec.hidden_dims = {3};
        ec.output_dim = d;
        ec.dropout_rate = 0.0;
        ec.seed = rng();
        auto enc = init_params(ec);
        Matrix x;
        fill(x, n, ec.input_dim, unif);

        std::vector<int> batch(n);
        for (int i = 0; i < n; ++i) batch[i] = i;

        auto loss_at = [&](EncoderParams& p) {
            st.f1 = forward(p, x, false).first;
            return total_loss(st, sims, attrs, cfg).total;
        };

        auto [f1, cache] = forward(enc, x, false);
        st.f1 = f1;
        auto [df1, df2] = grad_features(st, sims, attrs, cfg, batch);
        auto [dc1, dc2] = grad_category(st, attrs, cfg, batch);
        auto [dw1, dw2] = grad_projection(st, cfg);
        auto enc_grads = backward(enc, cache, df1);

        auto fd_matrix = [&](Matrix& target, const Matrix& analytic) {
            for (Eigen::Index i = 0; i < target.rows(); ++i)
                for (Eigen::Index j = 0; j < target.cols(); ++j) {
                    double saved = target(i, j);
                    target(i, j) = saved + h;
                    double up = total_loss(st, sims, attrs, cfg).total;
                    target(i, j) = saved - h;
                    double down = total_loss(st, sims, attrs, cfg).total;
                    target(i, j) = saved;
                    ++checked;
                    if (!rel_close((up - down) / (2 * h), analytic(i, j), tol)) return false;
                }
            return true;
        };

        bool ok = fd_matrix(st.f1, df1) && fd_matrix(st.f2, df2) && fd_matrix(st.c1, dc1) &&
                  fd_matrix(st.c2, dc2) && fd_matrix(st.w1, dw1) && fd_matrix(st.w2, dw2);
        if (!ok) {
            detail = "analytic/FD mismatch in state gradients, trial " + std::to_string(trial);
            return false;
        }

        // encoder parameters: FD of the whole objective through the forward
        // pass against chain-rule gradients
        st.f1 = f1;
        for (int l = 0; l < enc.num_layers(); ++l) {
            for (Eigen::Index i = 0; i < enc.weights[l].rows(); ++i)
                for (Eigen::Index j = 0; j < enc.weights[l].cols(); ++j) {
                    double saved = enc.weights[l](i, j);
                    enc.weights[l](i, j) = saved + h;
                    double up = loss_at(enc);
                    enc.weights[l](i, j) = saved - h;
                    double down = loss_at(enc);
                    enc.weights[l](i, j) = saved;
                    ++checked;
                    if (!rel_close((up - down) / (2 * h), enc_grads.weights[l](i, j), tol)) {
                        detail = "encoder weight gradient mismatch, trial " +
                                 std::to_string(trial);
                        return false;
                    }
                }
            for (Eigen::Index i = 0; i < enc.biases[l].size(); ++i) {
                double saved = enc.biases[l](i);
                enc.biases[l](i) = saved + h;
                double up = loss_at(enc);
                enc.biases[l](i) = saved - h;
                double down = loss_at(enc);
                enc.biases[l](i) = saved;
                ++checked;
                if (!rel_close((up - down) / (2 * h), enc_grads.biases[l](i), tol)) {
                    detail = "encoder bias gradient mismatch, trial " + std::to_string(trial);
                    return false;
                }
            }
        }
        st.f1 = f1;
    }

    double secs = seconds_since(start);
    detail = std::to_string(checked) + " entries checked in " + std::to_string(secs) + " s";
    if (secs >= 10.0) {
        detail += " (limit 10 s exceeded)";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 2. The sign update is the brute-force optimum and is scale invariant.

bool check_sign_step(std::string& detail) {
    auto start = Clock::now();
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const int n = 4, b = 4, cells = n * b;

    for (int draw = 0; draw < 100; ++draw) {
        int c = 2 + (int)(rng() % 3);
        TrainState st;
        auto fill = [&](Matrix& m, int r, int cc) {
            m.resize(r, cc);
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < cc; ++j) m(i, j) = unif(rng);
        };
        fill(st.c1, n, c);
        fill(st.c2, n, c);
        fill(st.w1, c, b);
        fill(st.w2, c, b);
        Matrix u = st.c1 * st.w1 + st.c2 * st.w2;

        TrainerConfig cfg;
        Matrix best;
        double best_trace = -1e300;
        for (int mask = 0; mask < (1 << cells); ++mask) {
            double trace = 0.0;
            for (int k = 0; k < cells; ++k)
                trace += ((mask >> k) & 1 ? 1.0 : -1.0) * u(k / b, k % b);
            if (trace > best_trace) {
                best_trace = trace;
                best.resize(n, b);
                for (int k = 0; k < cells; ++k)
                    best(k / b, k % b) = (mask >> k) & 1 ? 1.0 : -1.0;
            }
        }

        for (double lambda : {1e-3, 1.0, 1e3}) {
            cfg.lambda = lambda;
            Matrix got = update_codes(st, cfg);
            if (got != best) {
                detail = "sign update differs from brute force at draw " +
                         std::to_string(draw) + ", lambda " + std::to_string(lambda);
                return false;
            }
        }
    }

    double secs = seconds_since(start);
    detail = "100 draws, exhaustive over 2^16 codes, " + std::to_string(secs) + " s";
    if (secs >= 5.0) {
        detail += " (limit 5 s exceeded)";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// 3. Composite similarities live in [0,1], grow with label similarity, and
//    match a hand oracle.

bool check_similarity_bounds(std::string& detail) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100000; ++trial) {
        double feat = unit(rng), jac = unit(rng), m = unit(rng);
        double intra = feat * (1.0 + (jac - feat));
        double inter = jac * (1.0 + (m - jac));
        if (intra < 0.0 || intra > 1.0 || inter < 0.0 || inter > 1.0) {
            detail = "composite value left [0,1]";
            return false;
        }
        double jac2 = unit(rng);
        double intra2 = feat * (1.0 + (jac2 - feat));
        if (jac2 > jac && intra2 < intra) {
            detail = "intra composite not monotone in label similarity";
            return false;
        }
    }

    // hand oracle: three instances, frozen by manual computation
    CrossModalDataset ds;
    ds.modality1.features.resize(3, 2);
    ds.modality1.features << 0, 0, 1, 0, 0, 2;
    ds.modality2.features.resize(3, 1);
    ds.modality2.features << 0, 3, 1;
    ds.modality1.label_sets = {LabelSet{"a"}, LabelSet{"a", "b"}, LabelSet{}};
    ds.modality2.label_sets = {LabelSet{"a"}, LabelSet{"c"}, LabelSet{}};
    ds.modality1.label_universe = {"a", "b"};
    ds.modality2.label_universe = {"a", "c"};
    ds.attributes.categories = {"a", "b", "c"};
    ds.attributes.vectors = Matrix::Identity(3, 3);
    ds.n = 3;
    ds.l = 2;
    ds.u = 1;
    ScenarioSplit split;
    split.scenario = Scenario::A;
    split.train_indices = {0, 1, 2};
    split.seen_categories_m1 = {"a", "b", "c"};
    split.seen_categories_m2 = {"a", "b", "c"};
    auto sims = build_all(ds, split);

    const double g = 1.0 / (1.0 + std::sqrt(5.0));  // m1 distance between rows 1 and 2
    Matrix e11(3, 3), e22(3, 3), e12(3, 3);
    e11 << 1.0, 0.5, 1.0 / 3.0,
           0.5, 1.0, g,
           1.0 / 3.0, g, 1.0;
    e22 << 1.0, 0.1875, 0.5,
           0.1875, 1.0, 1.0 / 3.0,
           0.5, 1.0 / 3.0, 1.0;
    double m12 = 0.5 * (g + 1.0 / 3.0);
    e12 << 1.0, 0.0, 0.5 * (1.0 / 3.0 + 0.5),
           0.421875, 0.0, m12,
           0.5 * (1.0 / 3.0 + 0.5), m12, 1.0;
    if (!sims.s11.isApprox(e11, 1e-12) || !sims.s22.isApprox(e22, 1e-12) ||
        !sims.s12.isApprox(e12, 1e-12)) {
        detail = "3-instance hand oracle mismatch";
        return false;
    }
    detail = "100000 sampled pairs plus exact hand oracle";
    return true;
}

// ---------------------------------------------------------------------------
// 4. MAP behaves exactly as defined.

double naive_ap(const std::vector<char>& rel) {
    double sum = 0.0;
    int total = 0;
    for (std::size_t r = 1; r <= rel.size(); ++r) {
        if (!rel[r - 1]) continue;
        int hits = 0;
        for (std::size_t i = 0; i < r; ++i) hits += rel[i] ? 1 : 0;
        sum += (double)hits / (double)r;
        ++total;
    }
    return sum / (double)total;
}

bool check_map(std::string& detail) {
    // (1/1 + 2/3)/2 and 5/6 differ by one ulp in double arithmetic
    if (std::abs(average_precision({1, 0, 1}, 2) - 5.0 / 6.0) > 1e-15) {
        detail = "AP([1,0,1]) != 5/6";
        return false;
    }

    // random rankings, balanced relevance: mean AP near p within 3 sigma
    const int n = 400, t = 200, seeds = 50;
    std::vector<double> aps;
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(9000 + s);
        std::vector<char> rel(n, 0);
        std::fill(rel.begin(), rel.begin() + t, (char)1);
        std::shuffle(rel.begin(), rel.end(), rng);
        aps.push_back(average_precision(rel, t));
    }
    double mean = 0.0;
    for (double a : aps) mean += a;
    mean /= seeds;
    double var = 0.0;
    for (double a : aps) var += (a - mean) * (a - mean);
    double sem = std::sqrt(var / (seeds - 1)) / std::sqrt((double)seeds);
    double p = (double)t / n;
    if (std::abs(mean - p) > 3.0 * sem + 5e-3) {
        detail = "random-ranking MAP " + std::to_string(mean) + " too far from " +
                 std::to_string(p);
        return false;
    }

    // independent naive implementation agrees to 1e-12
    std::mt19937_64 rng(606);
    for (int trial = 0; trial < 1000; ++trial) {
        int len = 1 + (int)(rng() % 60);
        std::vector<char> rel(len);
        int tt = 0;
        for (auto& r : rel) tt += (r = rng() % 2);
        if (tt == 0) {
            rel[0] = 1;
            tt = 1;
        }
        if (std::abs(average_precision(rel, tt) - naive_ap(rel)) > 1e-12) {
            detail = "naive AP re-implementation disagrees";
            return false;
        }
    }
    detail = "exact AP, 50-seed Monte Carlo, 1000 naive cross-checks";
    return true;
}

// ---------------------------------------------------------------------------
// 5. Training halves the objective on the default profile and every sign
//    update is non-increasing in the quantization terms.

bool check_loss_descent(std::string& detail) {
    auto start = Clock::now();
    ExperimentConfig cfg = default_profile();
    cfg.seed = 1;
    CrossModalDataset ds = obtain_dataset(cfg);
    auto split = make_split(ds, Scenario::A, 0.8, 0.0, 1);
    auto sims = build_all(ds, split);

    EncoderConfig e1, e2;
    e1.input_dim = (int)ds.modality1.features.cols();
    e2.input_dim = (int)ds.modality2.features.cols();
    e1.output_dim = e2.output_dim = (int)ds.attributes.vectors.cols();
    e1.hidden_dims = e2.hidden_dims = cfg.hidden_dims;
    e1.dropout_rate = e2.dropout_rate = cfg.dropout_rate;
    e1.seed = 100;
    e2.seed = 101;
    auto result = train(ds, split, sims, e1, e2, cfg.trainer);
    const auto& h = result.state.history;
    if (h.back().total >= 0.5 * h.front().total) {
        detail = "final loss " + std::to_string(h.back().total) + " vs initial " +
                 std::to_string(h.front().total);
        return false;
    }

    // every sign update is non-increasing: replay alternating steps on the
    // trained state with explicit before/after measurements
    TrainState st = result.state;
    TrainerConfig tc = cfg.trainer;
    std::vector<int> all((int)split.train_indices.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = (int)i;
    for (int round = 0; round < 10; ++round) {
        auto [dc1, dc2] = grad_category(st, ds.attributes, tc, all);
        st.c1 -= tc.learning_rate * dc1;
        st.c2 -= tc.learning_rate * dc2;
        auto [w1, w2] = closed_form_projection(st);
        st.w1 = std::move(w1);
        st.w2 = std::move(w2);
        double before = (st.c1 * st.w1 - st.codes).squaredNorm() +
                        (st.c2 * st.w2 - st.codes).squaredNorm();
        st.codes = update_codes(st, tc);
        double after = (st.c1 * st.w1 - st.codes).squaredNorm() +
                       (st.c2 * st.w2 - st.codes).squaredNorm();
        if (after > before + 1e-9) {
            detail = "sign update increased the quantization term";
            return false;
        }
    }

    double secs = seconds_since(start);
    detail = "loss " + std::to_string(h.front().total) + " -> " +
             std::to_string(h.back().total) + " in " + std::to_string(secs) + " s";
    if (secs >= 120.0) {
        detail += " (limit 120 s exceeded)";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Shared reduced profile for the trend criteria: small enough to train many
// times, large enough for stable MAP estimates.

ExperimentConfig trend_profile() {
    ExperimentConfig cfg = default_profile();
    cfg.synthetic.n = 300;
    cfg.synthetic.c = 8;
    // keep the attribute matrix rectangular: a square random attribute
    // matrix is ill-conditioned and destabilizes the out-of-sample ridge fit
    cfg.synthetic.d = 16;
    cfg.synthetic.d1 = 24;
    cfg.synthetic.d2 = 20;
    cfg.synthetic.labels_per_instance = 1;
    cfg.synthetic.label_space_overlap = 0.75;
    cfg.hidden_dims = {32};
    cfg.trainer.iterations = 200;
    cfg.trainer.batch_size = 64;
    cfg.trainer.learning_rate = 1.5e-3;
    cfg.bits_list = {16};
    cfg.seed = 12;
    return cfg;
}

struct MapStats {
    double mean_12 = 0, mean_21 = 0, sigma = 0;
};

MapStats scenario_stats(const CrossModalDataset& ds, ExperimentConfig cfg, int repeats) {
    std::vector<double> v12, v21;
    for (int rep = 0; rep < repeats; ++rep) {
        auto run = run_single(ds, cfg, 16, rep);
        v12.push_back(run.reports[0].map);
        v21.push_back(run.reports[1].map);
    }
    MapStats s;
    for (double v : v12) s.mean_12 += v;
    for (double v : v21) s.mean_21 += v;
    s.mean_12 /= repeats;
    s.mean_21 /= repeats;
    double var = 0.0;
    for (double v : v12) var += (v - s.mean_12) * (v - s.mean_12);
    for (double v : v21) var += (v - s.mean_21) * (v - s.mean_21);
    s.sigma = std::sqrt(var / std::max(1, 2 * repeats - 2));
    return s;
}

// 6. MAP degrades monotonically across scenarios A >= B >= C >= D.

bool check_scenario_trend(std::string& detail) {
    ExperimentConfig cfg = trend_profile();
    CrossModalDataset ds = obtain_dataset(cfg);
    const int repeats = 8;

    std::vector<MapStats> stats;
    for (Scenario sc : {Scenario::A, Scenario::B, Scenario::C, Scenario::D}) {
        ExperimentConfig c = cfg;
        c.scenario = sc;
        stats.push_back(scenario_stats(ds, c, repeats));
    }

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "A=(%.3f,%.3f) B=(%.3f,%.3f) C=(%.3f,%.3f) D=(%.3f,%.3f)",
                  stats[0].mean_12, stats[0].mean_21, stats[1].mean_12, stats[1].mean_21,
                  stats[2].mean_12, stats[2].mean_21, stats[3].mean_12, stats[3].mean_21);
    detail = buf;

    for (int i = 0; i + 1 < 4; ++i) {
        double sigma = std::max(stats[i].sigma, stats[i + 1].sigma);
        if (stats[i].mean_12 < stats[i + 1].mean_12 - sigma ||
            stats[i].mean_21 < stats[i + 1].mean_21 - sigma) {
            detail += " (ordering violated beyond run-to-run sigma)";
            return false;
        }
    }
    return true;
}

// 7. The full model beats its nFS and nJ ablations under heavy masking.

bool check_ablation_trend(std::string& detail) {
    ExperimentConfig cfg = trend_profile();
    cfg.scenario = Scenario::C;
    cfg.mask_fraction = 0.7;
    CrossModalDataset ds = obtain_dataset(cfg);
    const int repeats = 10;

    auto mean_map = [&](Ablation a) {
        ExperimentConfig c = cfg;
        c.trainer.ablation = a;
        double sum = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            auto run = run_single(ds, c, 16, rep);
            sum += 0.5 * (run.reports[0].map + run.reports[1].map);
        }
        return sum / repeats;
    };

    double full = mean_map(Ablation::full);
    double nfs = mean_map(Ablation::nFS);
    double nj = mean_map(Ablation::nJ);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "full=%.4f nFS=%.4f nJ=%.4f", full, nfs, nj);
    detail = buf;
    return full >= nfs && full >= nj;
}

// ---------------------------------------------------------------------------
// 8. Noise-free clusters are retrieved almost perfectly.

bool check_separable(std::string& detail) {
    auto start = Clock::now();
    ExperimentConfig cfg = default_profile();
    cfg.synthetic.n = 400;
    cfg.synthetic.c = 4;
    cfg.synthetic.d = 8;
    cfg.synthetic.d1 = 16;
    cfg.synthetic.d2 = 12;
    cfg.synthetic.cluster_noise = 0.0;
    cfg.synthetic.labels_per_instance = 1;
    cfg.hidden_dims = {32};
    cfg.trainer.iterations = 300;
    cfg.trainer.batch_size = 64;
    cfg.trainer.learning_rate = 1.5e-3;
    cfg.seed = 3;
    CrossModalDataset ds = obtain_dataset(cfg);
    auto run = run_single(ds, cfg, 32, 0);
    double m12 = run.reports[0].map, m21 = run.reports[1].map;
    double secs = seconds_since(start);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "map=(%.4f,%.4f) in %.1f s", m12, m21, secs);
    detail = buf;
    if (secs >= 60.0) {
        detail += " (limit 60 s exceeded)";
        return false;
    }
    return m12 >= 0.95 && m21 >= 0.95;
}

// ---------------------------------------------------------------------------
// 9. The whole pipeline is a pure function of its configuration.

bool check_determinism(std::string& detail) {
    ExperimentConfig cfg = trend_profile();
    cfg.scenario = Scenario::C;
    cfg.repeats = 2;
    cfg.trainer.iterations = 15;

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "czhash-acceptance";
    fs::create_directories(dir);
    auto render = [&](const fs::path& file) {
        write_results_csv(run_experiment(cfg), file);
        std::ifstream in(file, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    std::string a = render(dir / "a.csv");
    std::string b = render(dir / "b.csv");
    fs::remove_all(dir);
    if (a.empty() || a != b) {
        detail = "repeated runs produced different CSV bytes";
        return false;
    }
    detail = "two runs, byte-identical CSVs";
    return true;
}

}  // namespace

int main() {
    std::vector<Criterion> criteria{
        {1, "gradient oracle vs finite differences", check_gradient_oracle},
        {2, "sign-step optimality and scale invariance", check_sign_step},
        {3, "similarity bounds and hand oracle", check_similarity_bounds},
        {4, "MAP correctness", check_map},
        {5, "loss descent on the default profile", check_loss_descent},
        {6, "scenario degradation trend", check_scenario_trend},
        {7, "ablation trend under masking", check_ablation_trend},
        {8, "separable data near-perfect retrieval", check_separable},
        {9, "end-to-end determinism", check_determinism},
    };

    int failures = 0;
    for (auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", c.number,
                    c.title.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        failures += !ok;
    }
    return failures;
}
