#include "czhash/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace czhash {

double average_precision(const std::vector<char>& relevance, int t) {
    int count = (int)std::count(relevance.begin(), relevance.end(), (char)1);
    if (count != t) throw ShapeError("average_precision: t does not match relevance list");
    if (t == 0) throw ConfigError("average_precision undefined for zero relevant items");
    double sum = 0.0;
    int hits = 0;
    for (std::size_t r = 0; r < relevance.size(); ++r) {
        if (relevance[r]) {
            ++hits;
            sum += (double)hits / (double)(r + 1);
        }
    }
    return sum / (double)t;
}

double map_score(const std::vector<RelevanceJudgment>& queries) {
    double sum = 0.0;
    int scored = 0;
    for (const auto& q : queries) {
        if (q.t < 1) continue;  // no relevant items: query is skipped, not zero
        sum += average_precision(q.relevant, q.t);
        ++scored;
    }
    if (scored == 0) throw ConfigError("map_score: no query has relevant items");
    return sum / (double)scored;
}

RelevanceJudgment judge_relevance(const LabelSet& query_labels,
                                  const std::vector<LabelSet>& ranked_db_labels) {
    if (query_labels.empty()) throw ConfigError("judge_relevance: query has no labels");
    RelevanceJudgment j;
    j.relevant.reserve(ranked_db_labels.size());
    for (const auto& db : ranked_db_labels) {
        bool shares = std::any_of(query_labels.begin(), query_labels.end(),
                                  [&](const std::string& lab) { return db.count(lab) > 0; });
        j.relevant.push_back(shares ? 1 : 0);
        j.t += shares;
    }
    return j;
}

double precision_at(const std::vector<RelevanceJudgment>& queries, int r) {
    if (r < 1) throw ConfigError("precision_at: r must be >= 1");
    double sum = 0.0;
    int scored = 0;
    for (const auto& q : queries) {
        if (q.t < 1) continue;
        int top = std::min<int>(r, (int)q.relevant.size());
        int hits = (int)std::count(q.relevant.begin(), q.relevant.begin() + top, (char)1);
        sum += (double)hits / (double)r;
        ++scored;
    }
    if (scored == 0) throw ConfigError("precision_at: no scoreable queries");
    return sum / (double)scored;
}

void save_report_json(const EvalReport& report, const std::filesystem::path& file) {
    nlohmann::json j;
    j["map"] = report.map;
    j["direction"] = report.direction;
    j["bits"] = report.bits;
    j["scenario"] = report.scenario;
    j["per_query_ap"] = report.per_query_ap;
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [r, v] : report.precision_at) p[std::to_string(r)] = v;
    j["precision_at"] = p;
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    out << j.dump(2) << "\n";
}

}  // namespace czhash
