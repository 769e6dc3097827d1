#include "czhash/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace czhash {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kHeader = "czhash-dataset v1";

std::vector<std::string> split_string(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(line);
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void write_matrix_csv(const Matrix& m, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot open for writing: " + file.string());
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

Matrix read_matrix_csv(const fs::path& file, int expected_cols = -1) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open: " + file.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<double> row;
        for (const auto& tok : split_string(line, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(tok, &pos);
                if (pos != trim(tok).size() && pos != tok.size())
                    throw std::invalid_argument(tok);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(file.string() + ":" + std::to_string(lineno) +
                                 ": bad number '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ShapeError(file.string() + ":" + std::to_string(lineno) +
                             ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(file.string() + ": empty matrix");
    if (expected_cols >= 0 && (int)rows.front().size() != expected_cols)
        throw ShapeError(file.string() + ": unexpected column count");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

std::vector<LabelSet> read_labels(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open: " + file.string());
    std::vector<LabelSet> sets;
    std::string line;
    while (std::getline(in, line)) {
        LabelSet s;
        for (const auto& tok : split_string(trim(line), ';')) {
            auto t = trim(tok);
            if (!t.empty()) s.insert(t);
        }
        sets.push_back(std::move(s));
    }
    return sets;
}

void write_labels(const std::vector<LabelSet>& sets, const fs::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot open for writing: " + file.string());
    for (const auto& s : sets) {
        bool first = true;
        for (const auto& lab : s) {
            out << (first ? "" : ";") << lab;
            first = false;
        }
        out << "\n";
    }
}

std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

}  // namespace

void ModalityData::validate() const {
    if ((int)label_sets.size() != features.rows())
        throw ShapeError("label_sets length != feature row count");
    std::unordered_set<std::string> universe(label_universe.begin(), label_universe.end());
    if (universe.size() != label_universe.size())
        throw ParseError("duplicate category in label universe");
    for (const auto& s : label_sets)
        for (const auto& lab : s)
            if (!universe.count(lab))
                throw ParseError("label '" + lab + "' not in label universe");
}

int AttributeMatrix::index_of(const std::string& category) const {
    auto it = std::find(categories.begin(), categories.end(), category);
    if (it == categories.end())
        throw ParseError("category '" + category + "' has no attribute vector");
    return (int)(it - categories.begin());
}

void AttributeMatrix::validate() const {
    if ((int)categories.size() != vectors.rows())
        throw ShapeError("attribute rows != category count");
    std::unordered_set<std::string> seen(categories.begin(), categories.end());
    if (seen.size() != categories.size())
        throw ParseError("duplicate category in attribute matrix");
}

void CrossModalDataset::validate() const {
    modality1.validate();
    modality2.validate();
    attributes.validate();
    if (modality1.features.rows() != modality2.features.rows())
        throw ShapeError("modalities have different instance counts");
    if (n != (int)modality1.features.rows()) throw ShapeError("n mismatch");
    if (l + u != n) throw ShapeError("l + u != n");
    // attribute categories must be exactly the union of both universes
    std::set<std::string> uni(modality1.label_universe.begin(), modality1.label_universe.end());
    uni.insert(modality2.label_universe.begin(), modality2.label_universe.end());
    std::set<std::string> attr(attributes.categories.begin(), attributes.categories.end());
    if (uni != attr)
        throw ParseError("attribute categories differ from union of label universes");
    for (int i = 0; i < n; ++i) {
        bool labeled = !modality1.label_sets[i].empty() || !modality2.label_sets[i].empty();
        if (i < l && !labeled)
            throw ParseError("instance " + std::to_string(i) + " in labeled range but unlabeled");
        if (i >= l && labeled)
            throw ParseError("instance " + std::to_string(i) + " in unlabeled range but labeled");
    }
}

Scenario scenario_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Scenario::A;
    if (s == "B" || s == "b") return Scenario::B;
    if (s == "C" || s == "c") return Scenario::C;
    if (s == "D" || s == "d") return Scenario::D;
    throw ConfigError("unknown scenario '" + s + "'");
}

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::A: return "A";
        case Scenario::B: return "B";
        case Scenario::C: return "C";
        case Scenario::D: return "D";
    }
    return "?";
}

bool ScenarioSplit::is_masked(int index) const {
    return std::binary_search(masked_indices.begin(), masked_indices.end(), index);
}

void SyntheticConfig::validate() const {
    if (n <= 0 || c <= 0 || d <= 0 || d1 <= 0 || d2 <= 0 || labels_per_instance <= 0)
        throw ConfigError("all synthetic sizes must be positive");
    if (cluster_noise < 0) throw ConfigError("cluster_noise must be >= 0");
    if (label_space_overlap < 0 || label_space_overlap > 1)
        throw ConfigError("label_space_overlap must be in [0,1]");
    if (labels_per_instance > c)
        throw ConfigError("labels_per_instance exceeds category count");
}

CrossModalDataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::string> category_ids(cfg.c);
    for (int h = 0; h < cfg.c; ++h) category_ids[h] = "c" + std::to_string(h);

    // Cluster centroids double as the attribute vectors.
    Matrix centroids(cfg.c, cfg.d);
    for (int h = 0; h < cfg.c; ++h)
        for (int j = 0; j < cfg.d; ++j) centroids(h, j) = gauss(rng);

    // Shared/private category partition for the two label universes.
    int shared = (int)std::ceil(cfg.label_space_overlap * cfg.c);
    std::vector<int> order(cfg.c);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::set<int> uni1, uni2;
    for (int k = 0; k < cfg.c; ++k) {
        if (k < shared) {
            uni1.insert(order[k]);
            uni2.insert(order[k]);
        } else if ((k - shared) % 2 == 0) {
            uni1.insert(order[k]);
        } else {
            uni2.insert(order[k]);
        }
    }

    // Fixed random projections into each modality's feature space.
    Matrix proj1(cfg.d1, cfg.d), proj2(cfg.d2, cfg.d);
    double pscale = 1.0 / std::sqrt((double)cfg.d);
    for (int i = 0; i < cfg.d1; ++i)
        for (int j = 0; j < cfg.d; ++j) proj1(i, j) = gauss(rng) * pscale;
    for (int i = 0; i < cfg.d2; ++i)
        for (int j = 0; j < cfg.d; ++j) proj2(i, j) = gauss(rng) * pscale;

    CrossModalDataset ds;
    ds.modality1.features.resize(cfg.n, cfg.d1);
    ds.modality2.features.resize(cfg.n, cfg.d2);
    ds.modality1.label_sets.resize(cfg.n);
    ds.modality2.label_sets.resize(cfg.n);

    std::vector<int> clusters(cfg.c);
    std::iota(clusters.begin(), clusters.end(), 0);
    for (int i = 0; i < cfg.n; ++i) {
        // cluster memberships for this instance
        std::vector<int> pick = clusters;
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(cfg.labels_per_instance);
        std::sort(pick.begin(), pick.end());

        Vector latent = Vector::Zero(cfg.d);
        for (int h : pick) latent += centroids.row(h).transpose();
        latent /= (double)pick.size();

        Vector z1 = latent, z2 = latent;
        for (int j = 0; j < cfg.d; ++j) z1(j) += cfg.cluster_noise * gauss(rng);
        for (int j = 0; j < cfg.d; ++j) z2(j) += cfg.cluster_noise * gauss(rng);
        ds.modality1.features.row(i) = (proj1 * z1).transpose();
        ds.modality2.features.row(i) = (proj2 * z2).transpose();

        for (int h : pick) {
            if (uni1.count(h)) ds.modality1.label_sets[i].insert(category_ids[h]);
            if (uni2.count(h)) ds.modality2.label_sets[i].insert(category_ids[h]);
        }
    }

    for (int h : uni1) ds.modality1.label_universe.push_back(category_ids[h]);
    for (int h : uni2) ds.modality2.label_universe.push_back(category_ids[h]);
    ds.attributes.categories = category_ids;
    ds.attributes.vectors = centroids;
    ds.n = cfg.n;
    ds.l = cfg.n;  // the union universe covers every category, so all are labeled
    ds.u = 0;
    ds.validate();
    return ds;
}

void save_dataset(const CrossModalDataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream meta(dir / "meta.txt");
        if (!meta) throw ParseError("cannot write " + (dir / "meta.txt").string());
        meta << kHeader << "\n";
        meta << "n = " << ds.n << "\n";
        meta << "l = " << ds.l << "\n";
        meta << "m1.universe = " << join(ds.modality1.label_universe, ';') << "\n";
        meta << "m2.universe = " << join(ds.modality2.label_universe, ';') << "\n";
    }
    write_matrix_csv(ds.modality1.features, dir / "m1.features.csv");
    write_matrix_csv(ds.modality2.features, dir / "m2.features.csv");
    write_labels(ds.modality1.label_sets, dir / "m1.labels.txt");
    write_labels(ds.modality2.label_sets, dir / "m2.labels.txt");
    {
        std::ofstream out(dir / "attributes.csv");
        if (!out) throw ParseError("cannot write attributes.csv");
        char buf[64];
        for (int h = 0; h < (int)ds.attributes.categories.size(); ++h) {
            out << ds.attributes.categories[h];
            for (Eigen::Index j = 0; j < ds.attributes.vectors.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", ds.attributes.vectors(h, j));
                out << "," << buf;
            }
            out << "\n";
        }
    }
}

CrossModalDataset load_dataset(const fs::path& dir) {
    std::ifstream meta(dir / "meta.txt");
    if (!meta) throw ParseError("missing meta.txt in " + dir.string());
    std::string line;
    if (!std::getline(meta, line) || trim(line) != kHeader)
        throw ParseError((dir / "meta.txt").string() + ":1: expected header '" +
                         std::string(kHeader) + "'");
    CrossModalDataset ds;
    int lineno = 1;
    int declared_n = -1, declared_l = -1;
    while (std::getline(meta, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError((dir / "meta.txt").string() + ":" + std::to_string(lineno) +
                             ": expected 'key = value'");
        auto key = trim(t.substr(0, eq));
        auto value = trim(t.substr(eq + 1));
        if (key == "n") declared_n = std::stoi(value);
        else if (key == "l") declared_l = std::stoi(value);
        else if (key == "m1.universe" || key == "m2.universe") {
            auto& uni = key == "m1.universe" ? ds.modality1.label_universe
                                             : ds.modality2.label_universe;
            for (const auto& tok : split_string(value, ';'))
                if (!trim(tok).empty()) uni.push_back(trim(tok));
        }
        // unknown keys ignored for forward compatibility
    }

    ds.modality1.features = read_matrix_csv(dir / "m1.features.csv");
    ds.modality2.features = read_matrix_csv(dir / "m2.features.csv");
    ds.modality1.label_sets = read_labels(dir / "m1.labels.txt");
    ds.modality2.label_sets = read_labels(dir / "m2.labels.txt");

    {
        std::ifstream in(dir / "attributes.csv");
        if (!in) throw ParseError("missing attributes.csv in " + dir.string());
        int ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            if (trim(line).empty()) continue;
            auto toks = split_string(line, ',');
            if (toks.size() < 2)
                throw ParseError("attributes.csv:" + std::to_string(ln) + ": too few columns");
            ds.attributes.categories.push_back(trim(toks[0]));
            if (ds.attributes.vectors.size() == 0) {
                ds.attributes.vectors.resize(0, (Eigen::Index)toks.size() - 1);
            } else if ((Eigen::Index)toks.size() - 1 != ds.attributes.vectors.cols()) {
                throw ShapeError("attributes.csv:" + std::to_string(ln) +
                                 ": inconsistent vector length");
            }
            ds.attributes.vectors.conservativeResize(ds.attributes.vectors.rows() + 1,
                                                     Eigen::NoChange);
            for (std::size_t j = 1; j < toks.size(); ++j) {
                try {
                    ds.attributes.vectors(ds.attributes.vectors.rows() - 1, (Eigen::Index)j - 1) =
                        std::stod(toks[j]);
                } catch (const std::exception&) {
                    throw ParseError("attributes.csv:" + std::to_string(ln) + ": bad number '" +
                                     toks[j] + "'");
                }
            }
        }
    }

    ds.n = (int)ds.modality1.features.rows();
    ds.l = declared_l >= 0 ? declared_l : ds.n;
    ds.u = ds.n - ds.l;
    if (declared_n >= 0 && declared_n != ds.n)
        throw ShapeError("meta.txt declares n=" + std::to_string(declared_n) + " but files have " +
                         std::to_string(ds.n) + " rows");
    ds.validate();
    return ds;
}

namespace {

LabelSet pick_seen(const std::vector<std::string>& universe, double seen_fraction,
                   std::mt19937_64& rng) {
    int q = (int)universe.size();
    int n_seen = (int)std::lround(seen_fraction * q);
    n_seen = std::clamp(n_seen, 1, q);
    std::vector<int> order(q);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LabelSet seen;
    for (int k = 0; k < n_seen; ++k) seen.insert(universe[order[k]]);
    return seen;
}

bool intersects_complement(const LabelSet& labels, const LabelSet& seen) {
    for (const auto& lab : labels)
        if (!seen.count(lab)) return true;
    return false;
}

}  // namespace

ScenarioSplit make_split(const CrossModalDataset& ds, Scenario scenario,
                         double seen_fraction, double mask_fraction,
                         std::uint64_t seed) {
    if (seen_fraction <= 0 || seen_fraction > 1)
        throw ConfigError("seen_fraction must be in (0,1]");
    if (mask_fraction < 0 || mask_fraction >= 1)
        throw ConfigError("mask_fraction must be in [0,1)");

    std::mt19937_64 rng(seed);
    ScenarioSplit split;
    split.scenario = scenario;
    split.seed = seed;

    LabelSet full1(ds.modality1.label_universe.begin(), ds.modality1.label_universe.end());
    LabelSet full2(ds.modality2.label_universe.begin(), ds.modality2.label_universe.end());

    if (scenario == Scenario::A) {
        split.seen_categories_m1 = full1;
        split.seen_categories_m2 = full2;
        std::vector<int> order(ds.n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        int n_test = (int)std::ceil(0.2 * ds.n);
        split.test_indices.assign(order.begin(), order.begin() + n_test);
        split.train_indices.assign(order.begin() + n_test, order.end());
    } else {
        if (seen_fraction >= 1.0)
            throw ConfigError("zero-shot scenarios require seen_fraction < 1");
        if (scenario == Scenario::D) {
            split.seen_categories_m1 = pick_seen(ds.modality1.label_universe, seen_fraction, rng);
            split.seen_categories_m2 = pick_seen(ds.modality2.label_universe, seen_fraction, rng);
        } else {
            // shared draw over the union universe
            LabelSet seen = pick_seen(ds.attributes.categories, seen_fraction, rng);
            split.seen_categories_m1 = seen;
            split.seen_categories_m2 = seen;
        }
        // An instance carrying any unseen label (in its own modality's seen
        // set) goes to test; everything else, including unlabeled instances,
        // trains. Training label sets therefore never contain unseen ids.
        for (int i = 0; i < ds.n; ++i) {
            bool unseen = intersects_complement(ds.modality1.label_sets[i], split.seen_categories_m1) ||
                          intersects_complement(ds.modality2.label_sets[i], split.seen_categories_m2);
            (unseen ? split.test_indices : split.train_indices).push_back(i);
        }
        if (split.test_indices.empty())
            throw ConfigError("no test instances: no category ended up unseen");
        if (split.train_indices.empty())
            throw ConfigError("no training instances under seen-category filter");
    }

    if ((scenario == Scenario::C || scenario == Scenario::D) && mask_fraction > 0) {
        std::vector<int> order = split.train_indices;
        std::shuffle(order.begin(), order.end(), rng);
        int n_mask = (int)std::ceil(mask_fraction * (double)split.train_indices.size());
        split.masked_indices.assign(order.begin(), order.begin() + n_mask);
        std::sort(split.masked_indices.begin(), split.masked_indices.end());
    }

    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.test_indices.begin(), split.test_indices.end());
    return split;
}

void save_split(const ScenarioSplit& split, const fs::path& file) {
    json j;
    j["scenario"] = to_string(split.scenario);
    j["train"] = split.train_indices;
    j["test"] = split.test_indices;
    j["masked"] = split.masked_indices;
    j["seen_m1"] = std::vector<std::string>(split.seen_categories_m1.begin(),
                                            split.seen_categories_m1.end());
    j["seen_m2"] = std::vector<std::string>(split.seen_categories_m2.begin(),
                                            split.seen_categories_m2.end());
    j["seed"] = split.seed;
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write split file " + file.string());
    out << j.dump(2) << "\n";
}

ScenarioSplit load_split(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open split file " + file.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    ScenarioSplit split;
    try {
        split.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        split.train_indices = j.at("train").get<std::vector<int>>();
        split.test_indices = j.at("test").get<std::vector<int>>();
        split.masked_indices = j.at("masked").get<std::vector<int>>();
        auto s1 = j.at("seen_m1").get<std::vector<std::string>>();
        auto s2 = j.at("seen_m2").get<std::vector<std::string>>();
        split.seen_categories_m1 = LabelSet(s1.begin(), s1.end());
        split.seen_categories_m2 = LabelSet(s2.begin(), s2.end());
        split.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    std::sort(split.masked_indices.begin(), split.masked_indices.end());
    return split;
}

LabelSet visible_labels(const CrossModalDataset& ds, const ScenarioSplit& split,
                        int modality, int index) {
    if (modality != 1 && modality != 2) throw ConfigError("modality must be 1 or 2");
    if (index < 0 || index >= ds.n) throw ShapeError("instance index out of range");
    if (split.is_masked(index)) return {};
    const auto& labels =
        modality == 1 ? ds.modality1.label_sets[index] : ds.modality2.label_sets[index];
    const auto& seen =
        modality == 1 ? split.seen_categories_m1 : split.seen_categories_m2;
    LabelSet out;
    for (const auto& lab : labels)
        if (seen.count(lab)) out.insert(lab);
    return out;
}

}  // namespace czhash
