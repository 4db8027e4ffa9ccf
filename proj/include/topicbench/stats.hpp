#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace topicbench::stats {

struct PairwiseComparison {
    std::string first;
    std::string second;
    double mean_diff = 0.0;  // mean(second) - mean(first)
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

struct StatTestResult {
    std::string test;
    double statistic = 0.0;
    std::vector<double> df;
    double p_value = 1.0;
    std::optional<double> effect_size;
    std::vector<PairwiseComparison> pairwise;
    // Test-specific extras: critical_difference, zero_differences,
    // p_asymptotic, n, ...
    std::map<std::string, double> extra;
};

void to_json(nlohmann::json& j, const PairwiseComparison& p);
void from_json(const nlohmann::json& j, PairwiseComparison& p);
void to_json(nlohmann::json& j, const StatTestResult& r);
void from_json(const nlohmann::json& j, StatTestResult& r);

// Rows are blocks/datasets, columns are treatments/methods.
struct MetricTable {
    std::string metric;
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // values[row][column]

    std::vector<double> column(std::size_t c) const;
    std::vector<std::vector<double>> columns_as_groups() const;
    void validate() const;
};

// CSV with a header row "<label>,<col1>,<col2>,..." followed by
// "<row>,<v1>,<v2>,...". Summary rows (Mean/Minimum/Maximum) are ignored.
MetricTable read_metric_table_csv(const std::string& path, std::string metric = {});
MetricTable parse_metric_table_csv(const std::string& text, std::string metric = {});
std::string format_metric_table_csv(const MetricTable& table, int precision = 6);

struct Summary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Summary describe(std::span<const double> column);

/// One-way ANOVA across `groups`. statistic = F, df = {k-1, N-k},
/// effect_size = eta squared.
StatTestResult one_way_anova(const std::vector<std::vector<double>>& groups);

/// Tukey HSD with simultaneous (1 - alpha) confidence intervals from the
/// studentized range distribution. Pairs are (0,1), (0,2), ..., (1,2), ...;
/// mean_diff is mean(j) - mean(i). `labels` default to "0", "1", ...
StatTestResult tukey_hsd(const std::vector<std::vector<double>>& groups,
                         const std::vector<std::string>& labels = {}, double alpha = 0.05);

StatTestResult paired_t(std::span<const double> x, std::span<const double> y);

/// Wilcoxon signed-rank on x - y. Zero differences are dropped (their count
/// is reported in extra["zero_differences"]). Exact p for n <= exact_limit,
/// normal approximation with tie and continuity correction above.
StatTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    int exact_limit = 20);

StatTestResult pearson(std::span<const double> x, std::span<const double> y);

/// Friedman test on a blocks x treatments table (values are ranked within each
/// block with mid-ranks). p is the exact conditional permutation p-value when
/// the rank-sum state space is small enough, the chi-square approximation
/// otherwise; both are reported in extra.
StatTestResult friedman(const std::vector<std::vector<double>>& table);

/// Nemenyi post-hoc comparison of mean ranks. extra["critical_difference"]
/// holds CD = q_alpha * sqrt(k(k+1)/(6n)) with q_alpha the studentized range
/// quantile divided by sqrt(2).
StatTestResult nemenyi(const std::vector<std::vector<double>>& table,
                       const std::vector<std::string>& labels = {}, double alpha = 0.05);

/// Mid-ranks (1-based) of `values`.
std::vector<double> rank_with_ties(std::span<const double> values);

/// One line per pairwise comparison across (metric, result) pairs:
/// metric,test,first,second,mean_diff,ci_low,ci_high,p_value,significant
std::string format_pairwise_csv(const std::vector<std::pair<std::string, StatTestResult>>& results,
                                int precision = 10);

/// The full comparison battery for one metric table: ANOVA and Tukey HSD on
/// the columns.
nlohmann::json compare_metric_table(const MetricTable& table);

}  // namespace topicbench::stats
