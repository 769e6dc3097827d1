#pragma once

#include "czhash/common.hpp"

#include <filesystem>
#include <map>

namespace czhash {

struct RelevanceJudgment {
    std::vector<char> relevant;  // ordered by rank
    int t = 0;                   // number of relevant items
};

struct EvalReport {
    double map = 0.0;
    std::map<int, double> precision_at;
    std::vector<double> per_query_ap;  // queries with t >= 1 only
    std::string direction;             // "img_to_txt" or "txt_to_img"
    int bits = 0;
    std::string scenario;
};

// (1/t) * sum over relevant ranks r of (relevant in top r) / r. Throws on t = 0.
double average_precision(const std::vector<char>& relevance, int t);

double map_score(const std::vector<RelevanceJudgment>& queries);

// Relevant iff the item shares at least one ground-truth category with the
// query.
RelevanceJudgment judge_relevance(const LabelSet& query_labels,
                                  const std::vector<LabelSet>& ranked_db_labels);

// Mean precision in the top r over queries with t >= 1.
double precision_at(const std::vector<RelevanceJudgment>& queries, int r);

void save_report_json(const EvalReport& report, const std::filesystem::path& file);

}  // namespace czhash
