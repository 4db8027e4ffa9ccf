#include "topicbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "topicbench/distributions.hpp"
#include "topicbench/error.hpp"

namespace topicbench::stats {
namespace {

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::string> default_labels(std::size_t k, const std::vector<std::string>& labels) {
    if (labels.size() == k) {
        return labels;
    }
    if (!labels.empty()) {
        throw ValidationError("expected " + std::to_string(k) + " labels, got " +
                              std::to_string(labels.size()));
    }
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(std::to_string(i));
    }
    return out;
}

void require_groups(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) {
        throw ValidationError("at least two groups are required");
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].size() < 2) {
            throw ValidationError("group " + std::to_string(g) + " has fewer than 2 values");
        }
    }
}

void require_same_length(std::span<const double> x, std::span<const double> y, std::size_t min_n) {
    if (x.size() != y.size()) {
        throw ValidationError("paired samples must have equal length");
    }
    if (x.size() < min_n) {
        throw ValidationError("at least " + std::to_string(min_n) + " pairs are required");
    }
}

struct AnovaParts {
    std::vector<double> means;
    std::vector<std::size_t> sizes;
    double ss_between = 0.0;
    double ss_within = 0.0;
    std::size_t total = 0;
};

AnovaParts anova_parts(const std::vector<std::vector<double>>& groups) {
    AnovaParts parts;
    double grand = 0.0;
    for (const auto& g : groups) {
        parts.means.push_back(mean_of(g));
        parts.sizes.push_back(g.size());
        parts.total += g.size();
        grand += std::accumulate(g.begin(), g.end(), 0.0);
    }
    grand /= static_cast<double>(parts.total);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double d = parts.means[i] - grand;
        parts.ss_between += static_cast<double>(parts.sizes[i]) * d * d;
        for (double v : groups[i]) {
            const double w = v - parts.means[i];
            parts.ss_within += w * w;
        }
    }
    return parts;
}

// Mid-ranks of each block, doubled so they are integral.
std::vector<std::vector<int>> doubled_block_ranks(const std::vector<std::vector<double>>& table) {
    std::vector<std::vector<int>> out;
    out.reserve(table.size());
    for (const auto& row : table) {
        const auto ranks = rank_with_ties(row);
        std::vector<int> doubled;
        doubled.reserve(ranks.size());
        for (double r : ranks) {
            doubled.push_back(static_cast<int>(std::lround(2.0 * r)));
        }
        out.push_back(std::move(doubled));
    }
    return out;
}

void require_rank_table(const std::vector<std::vector<double>>& table) {
    if (table.size() < 2) {
        throw ValidationError("rank table needs at least 2 blocks");
    }
    const std::size_t k = table.front().size();
    if (k < 2) {
        throw ValidationError("rank table needs at least 2 treatments");
    }
    for (const auto& row : table) {
        if (row.size() != k) {
            throw ValidationError("rank table rows must all have the same length");
        }
    }
}

double friedman_statistic(const std::vector<double>& rank_sums, std::size_t n) {
    const double k = static_cast<double>(rank_sums.size());
    const double nn = static_cast<double>(n);
    double sum_sq = 0.0;
    for (double r : rank_sums) {
        sum_sq += r * r;
    }
    return 12.0 / (nn * k * (k + 1.0)) * sum_sq - 3.0 * nn * (k + 1.0);
}

// Exact permutation p-value of the Friedman statistic, conditional on each
// block's tie pattern. Returns nullopt if the state space grows too large.
std::optional<double> friedman_exact_p(const std::vector<std::vector<int>>& doubled, double observed,
                                       std::size_t state_limit = 2'000'000) {
    const std::size_t k = doubled.front().size();
    const std::size_t n = doubled.size();
    // Each state holds the doubled rank sums of treatments 0..k-2.
    std::map<std::vector<int>, double> states;
    states.emplace(std::vector<int>(k - 1, 0), 1.0);
    for (const auto& block : doubled) {
        std::vector<int> perm = block;
        std::sort(perm.begin(), perm.end());
        std::vector<std::vector<int>> perms;
        do {
            perms.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const double weight = 1.0 / static_cast<double>(perms.size());

        std::map<std::vector<int>, double> next;
        for (const auto& [sums, prob] : states) {
            for (const auto& p : perms) {
                std::vector<int> s = sums;
                for (std::size_t j = 0; j + 1 < k; ++j) {
                    s[j] += p[j];
                }
                next[s] += prob * weight;
            }
            if (next.size() > state_limit) {
                return std::nullopt;
            }
        }
        states = std::move(next);
    }
    // Doubled grand total is fixed: n * k * (k + 1).
    const int grand = static_cast<int>(n * k * (k + 1));
    double p = 0.0;
    std::vector<double> sums(k);
    for (const auto& [s, prob] : states) {
        int last = grand;
        for (std::size_t j = 0; j + 1 < k; ++j) {
            sums[j] = 0.5 * s[j];
            last -= s[j];
        }
        sums[k - 1] = 0.5 * last;
        if (friedman_statistic(sums, n) >= observed - 1e-9) {
            p += prob;
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

std::vector<double> rank_with_ties(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            ranks[order[t]] = mid;
        }
        i = j + 1;
    }
    return ranks;
}

Summary describe(std::span<const double> column) {
    if (column.empty()) {
        throw ValidationError("describe: empty column");
    }
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    return Summary{mean_of(column), *lo, *hi};
}

StatTestResult one_way_anova(const std::vector<std::vector<double>>& groups) {
    require_groups(groups);
    const auto parts = anova_parts(groups);
    const double k = static_cast<double>(groups.size());
    const double n = static_cast<double>(parts.total);
    const double df_between = k - 1.0;
    const double df_within = n - k;
    const double ss_total = parts.ss_between + parts.ss_within;
    if (ss_total == 0.0) {
        throw DegenerateInputError("one_way_anova: all values are identical");
    }

    StatTestResult r;
    r.test = "one_way_anova";
    r.df = {df_between, df_within};
    const double ms_between = parts.ss_between / df_between;
    const double ms_within = parts.ss_within / df_within;
    r.statistic = ms_within == 0.0 ? std::numeric_limits<double>::infinity() : ms_between / ms_within;
    r.p_value = f_sf(r.statistic, df_between, df_within);
    r.effect_size = parts.ss_between / ss_total;
    r.extra["ss_between"] = parts.ss_between;
    r.extra["ss_within"] = parts.ss_within;
    r.extra["ms_within"] = ms_within;
    return r;
}

StatTestResult tukey_hsd(const std::vector<std::vector<double>>& groups,
                         const std::vector<std::string>& labels, double alpha) {
    require_groups(groups);
    const auto names = default_labels(groups.size(), labels);
    const auto parts = anova_parts(groups);
    const int k = static_cast<int>(groups.size());
    const double df = static_cast<double>(parts.total) - k;
    const double mse = parts.ss_within / df;
    const double q_crit = studentized_range_quantile(1.0 - alpha, k, df);

    StatTestResult r;
    r.test = "tukey_hsd";
    r.df = {static_cast<double>(k), df};
    r.extra["q_critical"] = q_crit;
    r.extra["alpha"] = alpha;
    double min_p = 1.0;
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            PairwiseComparison pc;
            pc.first = names[i];
            pc.second = names[j];
            pc.mean_diff = parts.means[j] - parts.means[i];
            const double se = std::sqrt(0.5 * mse *
                                        (1.0 / static_cast<double>(parts.sizes[i]) +
                                         1.0 / static_cast<double>(parts.sizes[j])));
            if (se == 0.0) {
                pc.p_value = pc.mean_diff == 0.0 ? 1.0 : 0.0;
            } else {
                pc.p_value = studentized_range_sf(std::fabs(pc.mean_diff) / se, k, df);
            }
            pc.ci_low = pc.mean_diff - q_crit * se;
            pc.ci_high = pc.mean_diff + q_crit * se;
            pc.significant = pc.p_value < alpha;
            min_p = std::min(min_p, pc.p_value);
            r.pairwise.push_back(std::move(pc));
        }
    }
    r.p_value = min_p;
    return r;
}

StatTestResult paired_t(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2);
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        d[i] = x[i] - y[i];
    }
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
        throw DegenerateInputError("paired_t: all differences are zero");
    }
    const double n = static_cast<double>(d.size());
    const double m = mean_of(d);
    double ss = 0.0;
    for (double v : d) {
        ss += (v - m) * (v - m);
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    StatTestResult r;
    r.test = "paired_t";
    r.df = {n - 1.0};
    r.statistic = sd == 0.0 ? std::copysign(std::numeric_limits<double>::infinity(), m)
                            : m / (sd / std::sqrt(n));
    r.p_value = t_two_sided(r.statistic, n - 1.0);
    r.effect_size = sd == 0.0 ? std::optional<double>{} : std::optional<double>{m / sd};
    r.extra["mean_difference"] = m;
    return r;
}

StatTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    int exact_limit) {
    require_same_length(x, y, 1);
    std::vector<double> d;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (v == 0.0) {
            ++zeros;
        } else {
            d.push_back(v);
        }
    }
    if (d.empty()) {
        throw DegenerateInputError("wilcoxon_signed_rank: all differences are zero");
    }
    std::vector<double> abs_d(d.size());
    std::transform(d.begin(), d.end(), abs_d.begin(), [](double v) { return std::fabs(v); });
    const auto ranks = rank_with_ties(abs_d);

    std::vector<int> doubled(ranks.size());
    int total = 0;
    int w_plus = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
        total += doubled[i];
        if (d[i] > 0.0) {
            w_plus += doubled[i];
        }
    }
    const int w = std::min(w_plus, total - w_plus);
    const std::size_t n = d.size();

    StatTestResult r;
    r.test = "wilcoxon_signed_rank";
    r.statistic = 0.5 * w;
    r.df = {static_cast<double>(n)};
    r.extra["zero_differences"] = static_cast<double>(zeros);
    r.extra["w_plus"] = 0.5 * w_plus;
    r.extra["w_minus"] = 0.5 * (total - w_plus);

    if (static_cast<int>(n) <= exact_limit) {
        // Distribution of the doubled positive rank sum over all 2^n sign patterns.
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        int reach = 0;
        for (int r2 : doubled) {
            for (int s = reach; s >= 0; --s) {
                if (counts[s] != 0.0) {
                    counts[s + r2] += counts[s];
                }
            }
            reach += r2;
        }
        double tail = 0.0;
        for (int s = 0; s <= w; ++s) {
            tail += counts[s];
        }
        r.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        r.extra["exact"] = 1.0;
    } else {
        const double nn = static_cast<double>(n);
        double tie_term = 0.0;
        std::vector<double> sorted = ranks;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) {
                ++j;
            }
            const double t = static_cast<double>(j - i);
            tie_term += t * t * t - t;
            i = j;
        }
        const double mu = nn * (nn + 1.0) / 4.0;
        const double sigma = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0);
        const double diff = std::fabs(0.5 * w - mu);
        const double z = std::max(0.0, diff - 0.5) / sigma;
        r.p_value = normal_two_sided(z);
        r.extra["exact"] = 0.0;
        r.extra["z"] = z;
    }
    return r;
}

StatTestResult pearson(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 3);
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DegenerateInputError("pearson: zero variance");
    }
    const double n = static_cast<double>(x.size());
    StatTestResult r;
    r.test = "pearson";
    r.statistic = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    r.df = {n - 2.0};
    const double one_minus = 1.0 - r.statistic * r.statistic;
    if (one_minus <= 0.0) {
        r.p_value = 0.0;
        r.extra["t"] = std::copysign(std::numeric_limits<double>::infinity(), r.statistic);
    } else {
        const double t = r.statistic * std::sqrt((n - 2.0) / one_minus);
        r.extra["t"] = t;
        r.p_value = t_two_sided(t, n - 2.0);
    }
    r.effect_size = r.statistic * r.statistic;
    return r;
}

StatTestResult friedman(const std::vector<std::vector<double>>& table) {
    require_rank_table(table);
    const std::size_t n = table.size();
    const std::size_t k = table.front().size();
    const auto doubled = doubled_block_ranks(table);
    std::vector<double> rank_sums(k, 0.0);
    for (const auto& block : doubled) {
        for (std::size_t j = 0; j < k; ++j) {
            rank_sums[j] += 0.5 * block[j];
        }
    }
    StatTestResult r;
    r.test = "friedman";
    r.statistic = friedman_statistic(rank_sums, n);
    // Round-off can leave tiny negative values for all-tie tables.
    if (std::fabs(r.statistic) < 1e-12) {
        r.statistic = 0.0;
    }
    r.df = {static_cast<double>(k - 1)};
    const double p_asym = chi_squared_sf(r.statistic, static_cast<double>(k - 1));
    r.extra["p_asymptotic"] = p_asym;
    r.extra["n"] = static_cast<double>(n);
    r.extra["k"] = static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) {
        r.extra["mean_rank_" + std::to_string(j)] = rank_sums[j] / static_cast<double>(n);
    }
    if (auto exact = friedman_exact_p(doubled, r.statistic)) {
        r.p_value = *exact;
        r.extra["exact"] = 1.0;
    } else {
        r.p_value = p_asym;
        r.extra["exact"] = 0.0;
    }
    return r;
}

StatTestResult nemenyi(const std::vector<std::vector<double>>& table,
                       const std::vector<std::string>& labels, double alpha) {
    require_rank_table(table);
    const std::size_t n = table.size();
    const std::size_t k = table.front().size();
    const auto names = default_labels(k, labels);
    std::vector<double> mean_ranks(k, 0.0);
    for (const auto& row : table) {
        const auto ranks = rank_with_ties(row);
        for (std::size_t j = 0; j < k; ++j) {
            mean_ranks[j] += ranks[j];
        }
    }
    for (double& m : mean_ranks) {
        m /= static_cast<double>(n);
    }
    const double kd = static_cast<double>(k);
    const double se = std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
    const int groups = static_cast<int>(k);
    const double q_alpha = studentized_range_quantile(1.0 - alpha, groups, kInfiniteDf) / M_SQRT2;
    const double cd = q_alpha * se;

    StatTestResult r;
    r.test = "nemenyi";
    r.df = {kd, kInfiniteDf};
    r.extra["critical_difference"] = cd;
    r.extra["q_alpha"] = q_alpha;
    r.extra["alpha"] = alpha;
    double min_p = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        r.extra["mean_rank_" + names[i]] = mean_ranks[i];
        for (std::size_t j = i + 1; j < k; ++j) {
            PairwiseComparison pc;
            pc.first = names[i];
            pc.second = names[j];
            pc.mean_diff = mean_ranks[j] - mean_ranks[i];
            pc.ci_low = pc.mean_diff - cd;
            pc.ci_high = pc.mean_diff + cd;
            pc.p_value = studentized_range_sf(std::fabs(pc.mean_diff) / se * M_SQRT2, groups, kInfiniteDf);
            pc.significant = std::fabs(pc.mean_diff) > cd;
            min_p = std::min(min_p, pc.p_value);
            r.pairwise.push_back(std::move(pc));
        }
    }
    r.statistic = *std::max_element(mean_ranks.begin(), mean_ranks.end()) -
                  *std::min_element(mean_ranks.begin(), mean_ranks.end());
    r.p_value = min_p;
    return r;
}

// ---------------------------------------------------------------------------
// Metric tables

std::vector<double> MetricTable::column(std::size_t c) const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& row : values) {
        out.push_back(row.at(c));
    }
    return out;
}

std::vector<std::vector<double>> MetricTable::columns_as_groups() const {
    std::vector<std::vector<double>> groups;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        groups.push_back(column(c));
    }
    return groups;
}

void MetricTable::validate() const {
    if (columns.empty() || values.empty()) {
        throw ValidationError("metric table '" + metric + "' is empty");
    }
    if (rows.size() != values.size()) {
        throw ValidationError("metric table '" + metric + "': row labels do not match rows");
    }
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (values[r].size() != columns.size()) {
            throw ValidationError("metric table '" + metric + "': row '" + rows[r] +
                                  "' has a missing cell");
        }
    }
}

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else {
                quoted = !quoted;
            }
        } else if (c == ',' && !quoted) {
            cells.push_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(trim(cell));
    return cells;
}

bool is_summary_label(std::string label) {
    std::transform(label.begin(), label.end(), label.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return label == "mean" || label == "minimum" || label == "maximum" || label == "min" ||
           label == "max";
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    return out + "\"";
}

}  // namespace

MetricTable parse_metric_table_csv(const std::string& text, std::string metric) {
    std::istringstream in(text);
    std::string line;
    MetricTable table;
    table.metric = std::move(metric);
    bool header = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (trim(line).empty()) {
            continue;
        }
        auto cells = split_csv_line(line);
        if (header) {
            if (cells.size() < 2) {
                throw ValidationError("metric table header needs a label and at least one column");
            }
            if (table.metric.empty()) {
                table.metric = cells[0];
            }
            table.columns.assign(cells.begin() + 1, cells.end());
            header = false;
            continue;
        }
        if (is_summary_label(cells[0])) {
            continue;
        }
        if (cells.size() != table.columns.size() + 1) {
            throw ValidationError("metric table line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(table.columns.size() + 1) +
                                  " cells");
        }
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cells[c], &used));
                if (used != cells[c].size()) {
                    throw std::invalid_argument("trailing characters");
                }
            } catch (const std::exception&) {
                throw ValidationError("metric table line " + std::to_string(line_no) +
                                      ": cannot parse '" + cells[c] + "'");
            }
        }
        table.rows.push_back(cells[0]);
        table.values.push_back(std::move(row));
    }
    table.validate();
    return table;
}

MetricTable read_metric_table_csv(const std::string& path, std::string metric) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open metric table " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_metric_table_csv(buffer.str(), std::move(metric));
}

std::string format_metric_table_csv(const MetricTable& table, int precision) {
    std::ostringstream out;
    out.precision(precision);
    out << csv_escape(table.metric.empty() ? "dataset" : table.metric);
    for (const auto& c : table.columns) {
        out << ',' << csv_escape(c);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out << csv_escape(table.rows[r]);
        for (double v : table.values[r]) {
            out << ',' << v;
        }
        out << '\n';
    }
    return out.str();
}

std::string format_pairwise_csv(const std::vector<std::pair<std::string, StatTestResult>>& results,
                                int precision) {
    std::ostringstream out;
    out.precision(precision);
    out << "metric,test,first,second,mean_diff,ci_low,ci_high,p_value,significant\n";
    for (const auto& [metric, result] : results) {
        for (const auto& p : result.pairwise) {
            out << csv_escape(metric) << ',' << csv_escape(result.test) << ',' << csv_escape(p.first) << ','
                << csv_escape(p.second) << ',' << p.mean_diff << ',' << p.ci_low << ',' << p.ci_high << ','
                << p.p_value << ',' << (p.significant ? "true" : "false") << '\n';
        }
    }
    return out.str();
}

nlohmann::json compare_metric_table(const MetricTable& table) {
    table.validate();
    const auto groups = table.columns_as_groups();
    nlohmann::json out;
    out["metric"] = table.metric;
    out["columns"] = table.columns;
    out["rows"] = table.rows;
    nlohmann::json summaries = nlohmann::json::object();
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const auto s = describe(groups[c]);
        summaries[table.columns[c]] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max}};
    }
    out["describe"] = summaries;
    try {
        out["anova"] = one_way_anova(groups);
        out["tukey_hsd"] = tukey_hsd(groups, table.columns);
    } catch (const ValidationError& e) {
        out["error"] = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json number_or_null(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return nullptr;
    }
    return v > 0 ? "inf" : "-inf";
}

double number_from(const nlohmann::json& j) {
    if (j.is_null()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        return s == "-inf" ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    }
    return j.get<double>();
}

}  // namespace

void to_json(nlohmann::json& j, const PairwiseComparison& p) {
    j = {{"first", p.first},       {"second", p.second},          {"mean_diff", p.mean_diff},
         {"ci_low", p.ci_low},     {"ci_high", p.ci_high},        {"p_value", p.p_value},
         {"significant", p.significant}};
}

void from_json(const nlohmann::json& j, PairwiseComparison& p) {
    j.at("first").get_to(p.first);
    j.at("second").get_to(p.second);
    j.at("mean_diff").get_to(p.mean_diff);
    j.at("ci_low").get_to(p.ci_low);
    j.at("ci_high").get_to(p.ci_high);
    j.at("p_value").get_to(p.p_value);
    j.at("significant").get_to(p.significant);
}

void to_json(nlohmann::json& j, const StatTestResult& r) {
    nlohmann::json df = nlohmann::json::array();
    for (double d : r.df) {
        df.push_back(number_or_null(d));
    }
    nlohmann::json extra = nlohmann::json::object();
    for (const auto& [k, v] : r.extra) {
        extra[k] = number_or_null(v);
    }
    j = {{"test", r.test},
         {"statistic", number_or_null(r.statistic)},
         {"df", df},
         {"p_value", r.p_value},
         {"effect_size", r.effect_size ? nlohmann::json(*r.effect_size) : nlohmann::json(nullptr)},
         {"pairwise", r.pairwise},
         {"extra", extra}};
}

void from_json(const nlohmann::json& j, StatTestResult& r) {
    j.at("test").get_to(r.test);
    r.statistic = number_from(j.at("statistic"));
    r.df.clear();
    for (const auto& d : j.at("df")) {
        r.df.push_back(number_from(d));
    }
    j.at("p_value").get_to(r.p_value);
    if (j.contains("effect_size") && !j.at("effect_size").is_null()) {
        r.effect_size = j.at("effect_size").get<double>();
    } else {
        r.effect_size.reset();
    }
    r.pairwise = j.value("pairwise", std::vector<PairwiseComparison>{});
    r.extra.clear();
    if (j.contains("extra")) {
        for (const auto& [k, v] : j.at("extra").items()) {
            r.extra[k] = number_from(v);
        }
    }
}

}  // namespace topicbench::stats
