#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "benchmark_tables.hpp"
#include "oracles.hpp"
#include "topicbench/distributions.hpp"
#include "topicbench/error.hpp"
#include "topicbench/stats.hpp"

using namespace topicbench;
using namespace topicbench::stats;
using doctest::Approx;

namespace {

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_SUITE("distributions") {

TEST_CASE("studentized range cdf against reference values") {
    // Reference values from an independent implementation (SciPy 1.x).
    struct Case { double q; int k; double df; double cdf; };
    const Case cases[] = {
        {3.5, 3, 33, 0.9522867315359826},
        {2.0, 3, 2, 0.5234394316261386},
        {1.0, 4, 10, 0.10798598138107782},
        {4.0, 5, 60, 0.9519494564560211},
        {3.3145, 3, kInfiniteDf, 0.9500006124039385},
        {0.5, 2, 5, 0.2619073981060859},
        {6.0, 3, 33, 0.9995178955838813},
    };
    for (const auto& c : cases) {
        CAPTURE(c.q);
        CAPTURE(c.k);
        CHECK(std::fabs(studentized_range_cdf(c.q, c.k, c.df) - c.cdf) < 1e-8);
    }
}

TEST_CASE("studentized range quantiles") {
    CHECK(std::fabs(studentized_range_quantile(0.95, 3, 33) - 3.4701894886275695) < 1e-7);
    CHECK(std::fabs(studentized_range_quantile(0.95, 3, kInfiniteDf) - 3.314493155398122) < 1e-7);
    CHECK(std::fabs(studentized_range_quantile(0.99, 4, 20) - 5.018016131510623) < 1e-7);
    CHECK(std::fabs(studentized_range_quantile(0.9, 2, 5) - 2.8497087384054045) < 1e-7);
}

TEST_CASE("studentized range tail for large q stays accurate and fast") {
    // SciPy studentized_range.sf reference values.
    CHECK(studentized_range_sf(50.0, 3, 3.0) == doctest::Approx(0.00010257904602950507).epsilon(1e-6));
    CHECK(studentized_range_sf(200.0, 3, 3.0) == doctest::Approx(1.6077908416844977e-06).epsilon(1e-6));
    CHECK(studentized_range_sf(30.0, 5, 2.0) == doctest::Approx(0.006804975270407909).epsilon(1e-6));
    // Near-constant groups give enormous q; this used to stall the quadrature.
    const auto start = std::chrono::steady_clock::now();
    CHECK(studentized_range_sf(1e12, 3, 3.0) < 1e-30);
    CHECK(studentized_range_sf(1e6, 3, 3.0) < 1e-15);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
}

TEST_CASE("two-group studentized range reduces to Student t") {
    // Q = sqrt(2)|T| for two groups.
    for (double df : {3.0, 7.0, 25.0}) {
        for (double q : {0.4, 1.5, 3.0, 5.0}) {
            const double via_t = 1.0 - t_two_sided(q / M_SQRT2, df);
            CHECK(std::fabs(studentized_range_cdf(q, 2, df) - via_t) < 1e-8);
        }
    }
}

TEST_CASE("cdf edge values") {
    CHECK(studentized_range_cdf(0.0, 3, 10) == 0.0);
    CHECK(studentized_range_cdf(-1.0, 3, 10) == 0.0);
    CHECK(studentized_range_sf(50.0, 3, 10) < 1e-8);
    CHECK_THROWS(studentized_range_cdf(1.0, 1, 10));
    CHECK(f_sf(0.0, 2, 10) == 1.0);
    CHECK(chi_squared_sf(0.0, 2) == 1.0);
}

}  // TEST_SUITE

TEST_SUITE("anova") {

TEST_CASE("identical group means give F = 0, p = 1") {
    const auto r = one_way_anova({{1, 2, 3}, {2, 1, 3}, {3, 2, 1}});
    CHECK(r.statistic == Approx(0.0));
    CHECK(r.p_value == Approx(1.0));
    REQUIRE(r.df.size() == 2);
    CHECK(r.df[0] == 2);
    CHECK(r.df[1] == 6);
}

TEST_CASE("random 3x5 fixture matches raw-moment sums of squares") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<std::vector<double>> groups = {
            random_values(rng, 5, 0, 10), random_values(rng, 5, 2, 12), random_values(rng, 5, -1, 9)};
        const auto ss = oracle::anova_raw_moments(groups);
        const double f_oracle = (ss.between / 2.0) / (ss.within / 12.0);
        const auto r = one_way_anova(groups);
        CHECK(std::fabs(r.statistic - f_oracle) < 1e-9 * std::max(1.0, f_oracle));
        CHECK(*r.effect_size == Approx(ss.between / (ss.between + ss.within)).epsilon(1e-9));
    }
}

TEST_CASE("F is invariant to shifting and positive scaling") {
    std::mt19937_64 rng(11);
    const std::vector<std::vector<double>> groups = {
        random_values(rng, 6, 0, 1), random_values(rng, 4, 0.5, 1.5), random_values(rng, 7, 0, 2)};
    const double f = one_way_anova(groups).statistic;
    auto shifted = groups;
    auto scaled = groups;
    for (auto& g : shifted) for (auto& v : g) v += 1000.0;
    for (auto& g : scaled) for (auto& v : g) v *= 37.5;
    CHECK(one_way_anova(shifted).statistic == Approx(f).epsilon(1e-8));
    CHECK(one_way_anova(scaled).statistic == Approx(f).epsilon(1e-10));
}

TEST_CASE("anova rejects small groups") {
    CHECK_THROWS_AS(one_way_anova({{1, 2}, {3}}), ValidationError);
    CHECK_THROWS_AS(one_way_anova({{1, 2, 3}}), ValidationError);
    CHECK_THROWS_AS(one_way_anova({{1, 1}, {1, 1}}), DegenerateInputError);
}

TEST_CASE("number-of-topics table") {
    const auto r = one_way_anova(benchmark_tables::groups(benchmark_tables::kNumberOfTopics));
    CHECK(r.statistic == Approx(12.00).epsilon(0.004));
    CHECK(*r.effect_size == Approx(0.42).epsilon(0.02));
    CHECK(r.p_value == Approx(0.00012).epsilon(0.05));
}

}  // TEST_SUITE

TEST_SUITE("tukey") {

TEST_CASE("identical groups: zero differences and symmetric intervals") {
    const std::vector<double> g = {1.0, 4.0, 2.0, 8.0};
    const auto r = tukey_hsd({g, g, g});
    REQUIRE(r.pairwise.size() == 3);
    for (const auto& pc : r.pairwise) {
        CHECK(pc.mean_diff == 0.0);
        CHECK(pc.ci_low == Approx(-pc.ci_high));
        CHECK(pc.ci_low < pc.ci_high);
        CHECK(pc.p_value == Approx(1.0));
    }
}

TEST_CASE("adjusted p never below the unadjusted pooled t-test p") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const std::vector<std::vector<double>> groups = {
            random_values(rng, 8, 0, 1), random_values(rng, 8, 0.2, 1.2),
            random_values(rng, 8, 0.4, 1.4), random_values(rng, 8, 0, 1)};
        const auto anova = one_way_anova(groups);
        const double mse = anova.extra.at("ms_within");
        const double df = anova.df[1];
        const auto r = tukey_hsd(groups);
        std::size_t idx = 0;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            for (std::size_t j = i + 1; j < groups.size(); ++j, ++idx) {
                const double se = std::sqrt(mse * (1.0 / 8 + 1.0 / 8));
                const double t = r.pairwise[idx].mean_diff / se;
                CHECK(r.pairwise[idx].p_value >= t_two_sided(t, df) - 1e-12);
            }
        }
    }
}

TEST_CASE("number-of-topics table pairs") {
    const auto r = tukey_hsd(benchmark_tables::groups(benchmark_tables::kNumberOfTopics),
                             benchmark_tables::kMethods);
    // (LDA, NMF), (LDA, BERTopic), (NMF, BERTopic)
    CHECK(r.pairwise[1].mean_diff == Approx(45.41).epsilon(0.001));
    CHECK(std::fabs(r.pairwise[1].ci_low - 17.16) < 0.5);
    CHECK(std::fabs(r.pairwise[1].ci_high - 73.66) < 0.5);
    CHECK(r.pairwise[2].mean_diff == Approx(51.66).epsilon(0.001));
    CHECK(r.pairwise[0].p_value > 0.8);
}

}  // TEST_SUITE

TEST_SUITE("paired") {

TEST_CASE("paired t closed form") {
    const std::vector<double> x = {1, 2, 3};
    const std::vector<double> y = {2, 4, 6};
    const auto r = paired_t(x, y);
    CHECK(r.statistic == Approx(-3.4641016).epsilon(1e-7));
    CHECK(r.df[0] == 2);
}

TEST_CASE("paired t degenerate and random fixtures") {
    const std::vector<double> x = {1, 2, 3};
    CHECK_THROWS_AS(paired_t(x, x), DegenerateInputError);

    std::mt19937_64 rng(19);
    const auto a = random_values(rng, 12, 0, 5);
    const auto b = random_values(rng, 12, 0, 5);
    double s = 0, s2 = 0;
    for (int i = 0; i < 12; ++i) {
        const double d = a[i] - b[i];
        s += d;
        s2 += d * d;
    }
    const double t_oracle = s / std::sqrt((12 * s2 - s * s) / 11.0);
    CHECK(std::fabs(paired_t(a, b).statistic - t_oracle) < 1e-9);
}

TEST_CASE("wilcoxon small exact cases") {
    const std::vector<double> d = {1, 2, 3, 4, 5};
    const std::vector<double> zero(5, 0.0);
    const auto r = wilcoxon_signed_rank(d, zero);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == Approx(0.0625));

    const std::vector<double> sym = {1, -1};
    const std::vector<double> z2(2, 0.0);
    CHECK(wilcoxon_signed_rank(sym, z2).p_value == Approx(1.0));
    CHECK_THROWS_AS(wilcoxon_signed_rank(zero, zero), DegenerateInputError);
}

TEST_CASE("wilcoxon drops zero differences and reports them") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6};
    const std::vector<double> y = {1, 0, 0, 0, 0, 0};
    const auto r = wilcoxon_signed_rank(x, y);
    CHECK(r.extra.at("zero_differences") == 1.0);
    CHECK(r.p_value == Approx(0.0625));
}

TEST_CASE("wilcoxon exact p equals sign-pattern enumeration, n = 12") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 5; ++rep) {
        auto a = random_values(rng, 12, 0, 3);
        const auto b = random_values(rng, 12, 0, 3);
        // Force some ties in |d|.
        a[1] = b[1] + 0.5;
        a[2] = b[2] - 0.5;
        std::vector<double> d(12);
        for (int i = 0; i < 12; ++i) d[i] = a[i] - b[i];
        CHECK(wilcoxon_signed_rank(a, b).p_value == Approx(oracle::wilcoxon_enumerated_p(d)).epsilon(1e-12));
    }
}

TEST_CASE("wilcoxon large-sample approximation is used above the exact limit") {
    std::mt19937_64 rng(5);
    const auto a = random_values(rng, 30, 0, 3);
    const auto b = random_values(rng, 30, 0.5, 3.5);
    const auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.extra.at("exact") == 0.0);
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
    // Against the exact value with a raised limit (n = 30 DP is cheap).
    const auto exact = wilcoxon_signed_rank(a, b, 40);
    CHECK(std::fabs(exact.p_value - r.p_value) < 0.01);
}

TEST_CASE("pearson") {
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> twice = {2, 4, 6, 8};
    const std::vector<double> neg = {-1, -2, -3, -4};
    CHECK(pearson(x, twice).statistic == Approx(1.0));
    CHECK(pearson(x, neg).statistic == Approx(-1.0));
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {1, 2, 4};
    // r = Sxy / sqrt(Sxx Syy) = 3 / sqrt(2 * 14/3)
    CHECK(pearson(a, b).statistic == Approx(3.0 / std::sqrt(28.0 / 3.0)).epsilon(1e-12));
    CHECK(pearson(a, b).statistic == Approx(0.982).epsilon(5e-4));
    const std::vector<double> flat = {2, 2, 2};
    CHECK_THROWS_AS(pearson(a, flat), DegenerateInputError);
}

TEST_CASE("pearson |r| <= 1 on random data") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = random_values(rng, 6, -1, 1);
        const auto y = random_values(rng, 6, -1, 1);
        const auto r = pearson(x, y);
        CHECK(std::fabs(r.statistic) <= 1.0);
        CHECK(r.p_value >= 0.0);
        CHECK(r.p_value <= 1.0);
    }
}

}  // TEST_SUITE

TEST_SUITE("rank tests") {

TEST_CASE("mid ranks") {
    const std::vector<double> v = {10, 20, 20, 5};
    const auto r = rank_with_ties(v);
    CHECK(r == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("friedman identical blocks hit the 2n bound") {
    std::vector<std::vector<double>> table(12, {1, 2, 3});
    const auto r = friedman(table);
    CHECK(r.statistic == 24.0);
    CHECK(r.df[0] == 2);
}

TEST_CASE("friedman all-tie blocks") {
    std::vector<std::vector<double>> table(5, {2, 2, 2});
    const auto r = friedman(table);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == Approx(1.0));
}

TEST_CASE("friedman exact p on 3x3 fixture equals enumeration of 6^3 tables") {
    const std::vector<std::vector<int>> ranks = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3}};
    std::vector<std::vector<double>> table;
    for (const auto& row : ranks) table.emplace_back(row.begin(), row.end());
    const auto r = friedman(table);
    CHECK(r.statistic == Approx(oracle::friedman_chi2_from_ranks(ranks)));
    CHECK(r.p_value == Approx(oracle::friedman_enumerated_p(ranks)).epsilon(1e-12));
    CHECK(r.extra.at("exact") == 1.0);
}

TEST_CASE("friedman statistic never exceeds n(k-1)") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<std::vector<double>> table;
        for (int b = 0; b < 6; ++b) table.push_back(random_values(rng, 4, 0, 1));
        const auto r = friedman(table);
        CHECK(r.statistic <= 6.0 * 3.0 + 1e-9);
        CHECK(r.statistic >= -1e-9);
    }
}

TEST_CASE("nemenyi critical difference for k = 3, n = 12") {
    std::vector<std::vector<double>> table(12, {1, 2, 3});
    const auto r = nemenyi(table);
    CHECK(std::fabs(r.extra.at("critical_difference") - 0.9565) < 1e-3);
}

TEST_CASE("nemenyi equal mean ranks: nothing significant") {
    std::vector<std::vector<double>> table = {{1, 2, 3}, {2, 3, 1}, {3, 1, 2},
                                              {1, 2, 3}, {2, 3, 1}, {3, 1, 2}};
    const auto r = nemenyi(table);
    for (const auto& pc : r.pairwise) {
        CHECK(pc.mean_diff == Approx(0.0));
        CHECK_FALSE(pc.significant);
    }
}

TEST_CASE("nemenyi flags a treatment always ranked last") {
    std::vector<std::vector<double>> table;
    for (int b = 0; b < 12; ++b) {
        table.push_back(b % 2 == 0 ? std::vector<double>{1, 2, 3} : std::vector<double>{2, 1, 3});
    }
    const auto r = nemenyi(table, {"A", "B", "C"});
    // Mean ranks 1.5, 1.5, 3: gap 1.5 > CD 0.957.
    for (const auto& pc : r.pairwise) {
        const bool involves_c = pc.first == "C" || pc.second == "C";
        CHECK(pc.significant == involves_c);
    }
}

}  // TEST_SUITE

TEST_SUITE("tables") {

TEST_CASE("describe") {
    const std::vector<double> one = {5};
    const auto s = describe(one);
    CHECK(s.mean == 5);
    CHECK(s.min == 5);
    CHECK(s.max == 5);
    CHECK_THROWS_AS(describe(std::vector<double>{}), ValidationError);
    const auto lda = describe(benchmark_tables::kDiversity.lda);
    CHECK(lda.mean == Approx(0.7333).epsilon(1e-4));
    CHECK(lda.min == 0.653);
    CHECK(lda.max == 0.800);
}

TEST_CASE("metric table CSV parse skips summary rows") {
    const auto t = parse_metric_table_csv(
        "dataset,LDA,NMF\nr/a,1,2\nr/b,3,4\nMean,2,3\n", "coherence");
    CHECK(t.rows == std::vector<std::string>{"r/a", "r/b"});
    CHECK(t.columns == std::vector<std::string>{"LDA", "NMF"});
    CHECK(t.column(1) == std::vector<double>{2, 4});
    const auto again = parse_metric_table_csv(format_metric_table_csv(t), "coherence");
    CHECK(again.values == t.values);
    CHECK_THROWS_AS(parse_metric_table_csv("d,A,B\nx,1\n"), ValidationError);
    CHECK_THROWS_AS(parse_metric_table_csv("d,A\nx,abc\n"), ValidationError);
}

TEST_CASE("stat result JSON round trip") {
    const auto r = tukey_hsd({{1, 2, 3}, {2, 3, 5}, {7, 8, 9}}, {"a", "b", "c"});
    const nlohmann::json j = r;
    const auto back = j.get<StatTestResult>();
    CHECK(back.test == r.test);
    CHECK(back.pairwise.size() == 3);
    CHECK(back.pairwise[2].ci_high == r.pairwise[2].ci_high);
    CHECK(back.extra == r.extra);
}

TEST_CASE("pairwise CSV has one line per comparison") {
    const auto r = tukey_hsd({{1, 2, 3}, {2, 3, 5}, {7, 8, 9}}, {"a", "b", "c"});
    const std::string csv = format_pairwise_csv({{"coherence", r}});
    std::istringstream in(csv);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "metric,test,first,second,mean_diff,ci_low,ci_high,p_value,significant");
    CHECK(lines[1].rfind("coherence," + r.test + ",a,b,", 0) == 0);
    CHECK(lines[3].ends_with(r.pairwise[2].significant ? ",true" : ",false"));
}

}  // TEST_SUITE
