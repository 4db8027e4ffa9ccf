// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Each check records every violated expectation so a FAIL
// line says exactly which number missed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "benchmark_tables.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"
#include "topicbench/embedding.hpp"
#include "topicbench/ingest.hpp"
#include "topicbench/metrics.hpp"
#include "topicbench/models.hpp"
#include "topicbench/selection.hpp"
#include "topicbench/stats.hpp"

using namespace topicbench;
using preprocess::TokenSet;

namespace {

class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    void near(double actual, double expected, double tol, const std::string& what) {
        expect(std::fabs(actual - expected) <= tol, fmt::format("{} = {:.6g}, expected {} +/- {}", what, actual,
                                                                 expected, tol));
    }
    const std::vector<std::string>& failures() const { return failures_; }

private:
    std::vector<std::string> failures_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

// ---------------------------------------------------------------------------
// Statistics on the five published tables

struct TableExpectation {
    const benchmark_tables::Table* table;
    std::function<void(Check&, const stats::StatTestResult&, const stats::StatTestResult&)> verify;
};

void stats_vs_tables(Check& c) {
    using benchmark_tables::kMethods;
    // Pairs come out as (LDA, NMF), (LDA, BERTopic), (NMF, BERTopic).
    const std::vector<TableExpectation> expectations{
        {&benchmark_tables::kNumberOfTopics,
         [](Check& c, const auto& anova, const auto& tukey) {
             c.near(anova.statistic, 12.00, 0.05, "topics F");
             c.near(*anova.effect_size, 0.42, 0.01, "topics eta^2");
             c.near(std::fabs(tukey.pairwise[1].mean_diff), 45.41, 0.1, "topics LDA-BERTopic diff");
             c.near(tukey.pairwise[1].ci_low, 17.16, 0.5, "topics LDA-BERTopic CI low");
             c.near(tukey.pairwise[1].ci_high, 73.66, 0.5, "topics LDA-BERTopic CI high");
             c.near(std::fabs(tukey.pairwise[2].mean_diff), 51.66, 0.1, "topics NMF-BERTopic diff");
         }},
        {&benchmark_tables::kCoherence,
         [](Check& c, const auto& anova, const auto& tukey) {
             c.near(anova.statistic, 21.25, 0.1, "coherence F");
             c.near(std::fabs(tukey.pairwise[1].mean_diff), 0.147, 0.005, "coherence LDA-BERTopic diff");
             c.near(tukey.pairwise[1].ci_low, 0.038, 0.01, "coherence LDA-BERTopic CI low");
             c.near(tukey.pairwise[1].ci_high, 0.256, 0.01, "coherence LDA-BERTopic CI high");
         }},
        {&benchmark_tables::kDiversity,
         [](Check& c, const auto& anova, const auto& tukey) {
             c.near(anova.statistic, 154.13, 0.5, "diversity F");
             for (const auto& p : tukey.pairwise) {
                 c.expect(p.p_value < 0.001, fmt::format("diversity {}-{} p = {:.3g}, expected < .001", p.first,
                                                         p.second, p.p_value));
             }
         }},
        {&benchmark_tables::kKlDivergence,
         [](Check& c, const auto& anova, const auto& tukey) {
             c.near(anova.statistic, 655.30, 2.0, "KL F");
             c.expect(tukey.pairwise[1].p_value > 0.9,
                      fmt::format("KL LDA-BERTopic p = {:.3g}, expected > .9", tukey.pairwise[1].p_value));
         }},
        {&benchmark_tables::kExecutionTime,
         [](Check& c, const auto& anova, const auto&) {
             c.near(anova.statistic, 5.41, 0.05, "time F");
             c.near(anova.p_value, 0.009, 0.002, "time p");
         }},
    };
    for (const auto& e : expectations) {
        const auto start = std::chrono::steady_clock::now();
        const auto groups = benchmark_tables::groups(*e.table);
        const auto anova = stats::one_way_anova(groups);
        const auto tukey = stats::tukey_hsd(groups, kMethods);
        const double secs = seconds_since(start);
        c.expect(anova.df == std::vector<double>{2.0, 33.0}, e.table->name + " df is not (2, 33)");
        c.expect(secs < 1.0, fmt::format("{} took {:.2f}s", e.table->name, secs));
        e.verify(c, anova, tukey);
    }
}

// Printed precision: a value matches when rounding half-up or truncating the
// computed value to the printed decimals gives the printed value. A summary
// row may mix precisions, so a printed value that needs more decimals than the
// row's nominal count is compared at its own precision.
bool matches_printed(double computed, double printed, int decimals) {
    while (decimals < 6 && std::fabs(printed * std::pow(10.0, decimals) -
                                     std::round(printed * std::pow(10.0, decimals))) > 1e-6) {
        ++decimals;
    }
    const double scale = std::pow(10.0, decimals);
    const double eps = 1e-9;
    const double rounded = std::floor(computed * scale + 0.5 + eps) / scale;
    const double truncated = std::floor(computed * scale + eps) / scale;
    const double tol = 0.5 / scale * 1e-6;
    return std::fabs(rounded - printed) <= tol || std::fabs(truncated - printed) <= tol;
}

void descriptive_reproduction(Check& c) {
    for (const auto* t : benchmark_tables::kAll) {
        const auto groups = benchmark_tables::groups(*t);
        for (std::size_t m = 0; m < groups.size(); ++m) {
            const auto s = stats::describe(groups[m]);
            const auto& p = t->summary[m];
            const auto label = t->name + " " + benchmark_tables::kMethods[m];
            c.expect(matches_printed(s.mean, p.mean, p.decimals),
                     fmt::format("{} mean {:.5f} does not print as {}", label, s.mean, p.mean));
            c.expect(matches_printed(s.min, p.min, p.decimals),
                     fmt::format("{} min {:.5f} does not print as {}", label, s.min, p.min));
            c.expect(matches_printed(s.max, p.max, p.decimals),
                     fmt::format("{} max {:.5f} does not print as {}", label, s.max, p.max));
        }
    }
}

void wilcoxon_exactness(Check& c) {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> size(1, 12);
    std::uniform_int_distribution<int> magnitude(1, 6);  // small range forces |d| ties
    std::bernoulli_distribution negative(0.5);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        std::vector<double> x(n), y(n, 0.0), d(n);
        for (int i = 0; i < n; ++i) {
            d[i] = (negative(rng) ? -1.0 : 1.0) * magnitude(rng) * 0.5;
            x[i] = d[i];
        }
        const double p = stats::wilcoxon_signed_rank(x, y).p_value;
        const double expected = oracle::wilcoxon_enumerated_p(d);
        if (std::fabs(p - expected) > 1e-12 * std::max(1.0, expected)) {
            if (++mismatches <= 3) c.expect(false, fmt::format("n = {}: p = {:.15g}, enumeration {:.15g}", n, p, expected));
        }
    }
    c.expect(mismatches == 0, fmt::format("{} of 200 fixtures differ from enumeration", mismatches));
}

void friedman_sanity(Check& c) {
    const std::vector<std::vector<double>> identical(12, {1.0, 2.0, 3.0});
    const auto r = stats::friedman(identical);
    c.expect(r.statistic == 24.0, fmt::format("identical blocks chi^2 = {:.17g}, expected 24", r.statistic));

    const std::vector<std::vector<int>> ranks = {{1, 2, 3}, {1, 3, 2}, {2, 1, 3}};
    std::vector<std::vector<double>> table;
    for (const auto& row : ranks) table.emplace_back(row.begin(), row.end());
    const auto small = stats::friedman(table);
    const double expected = oracle::friedman_enumerated_p(ranks);
    c.expect(std::fabs(small.p_value - expected) <= 1e-12,
             fmt::format("3x3 p = {:.15g}, enumeration {:.15g}", small.p_value, expected));
}

// ---------------------------------------------------------------------------
// Models

void planted_lda(Check& c) {
    // Two topics over disjoint halves of a 50-word vocabulary; each document
    // draws 90% of its words from one of them.
    std::mt19937_64 rng(11);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(2, 50);
    for (int w = 0; w < 25; ++w) {
        phi(0, w) = 1.0 + (w % 5);
        phi(1, 25 + w) = 1.0 + ((w * 3) % 7);
    }
    for (int k = 0; k < 2; ++k) phi.row(k) /= phi.row(k).sum();
    std::vector<std::discrete_distribution<int>> words;
    for (int k = 0; k < 2; ++k) {
        const Eigen::RowVectorXd row = phi.row(k);
        words.emplace_back(row.data(), row.data() + row.size());
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TokenSet> docs;
    for (int d = 0; d < 500; ++d) {
        const double p = u(rng) < 0.5 ? 0.9 : 0.1;
        TokenSet ts{"doc" + std::to_string(d), {}};
        for (int i = 0; i < 50; ++i) {
            const int w = words[u(rng) < p ? 0 : 1](rng);
            ts.tokens.push_back(fmt::format("w{:02d}", w));
        }
        docs.push_back(std::move(ts));
    }
    const auto vocab = models::build_vocabulary(docs);
    c.expect(vocab.size() == 50, fmt::format("vocabulary has {} words", vocab.size()));
    models::LdaConfig cfg;
    cfg.num_topics = 2;
    cfg.workers = 1;
    const auto start = std::chrono::steady_clock::now();
    const auto model = models::train_lda(models::to_bow(docs, vocab), vocab.tokens(), cfg);
    const double secs = seconds_since(start);
    c.expect(secs < 60.0, fmt::format("training took {:.1f}s", secs));

    // Map the learned rows back to w00..w49 by token, then greedy-match.
    Eigen::MatrixXd learned = Eigen::MatrixXd::Zero(2, 50);
    for (std::size_t w = 0; w < model.vocabulary.size(); ++w) {
        const int planted = std::stoi(model.vocabulary[w].substr(1));
        learned.col(planted) = model.topic_word.col(static_cast<Eigen::Index>(w));
    }
    std::set<int> used;
    for (int p = 0; p < 2; ++p) {
        double best = -1.0;
        int arg = -1;
        for (int k = 0; k < 2; ++k) {
            if (used.count(k)) continue;
            const double cos = phi.row(p).dot(learned.row(k)) / (phi.row(p).norm() * learned.row(k).norm());
            if (cos > best) {
                best = cos;
                arg = k;
            }
        }
        used.insert(arg);
        c.expect(best >= 0.9, fmt::format("planted topic {} best cosine {:.4f} < 0.9", p, best));
    }
}

models::SparseMatrix sparse(const Eigen::MatrixXd& m) {
    models::SparseMatrix s = m.sparseView();
    s.makeCompressed();
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void nmf_properties(Check& c) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(40, 25);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(rng) < 0.4 ? u(rng) : 0.0;
    models::NmfConfig cfg;
    cfg.num_topics = 4;
    cfg.tol = 1e-12;
    const auto f = models::factorize_nmf(sparse(X), cfg);
    c.expect(f.objective.size() >= 2, "objective trace has fewer than two entries");
    for (std::size_t i = 1; i < f.objective.size(); ++i) {
        if (f.objective[i] > f.objective[i - 1] + 1e-12 * f.objective[0]) {
            c.expect(false, fmt::format("objective rose at iteration {}: {:.12g} -> {:.12g}", i, f.objective[i - 1],
                                        f.objective[i]));
            break;
        }
    }

    Eigen::MatrixXd rank_one = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0) * Eigen::RowVectorXd::LinSpaced(5, 0.5, 2.5);
    models::NmfConfig one;
    one.num_topics = 1;
    one.max_iter = 500;
    const auto g = models::factorize_nmf(sparse(rank_one), one);
    const double rel = (rank_one - g.W * g.H).norm() / rank_one.norm();
    c.expect(rel < 1e-3, fmt::format("rank-1 relative error {:.3g}", rel));

    const auto vocab = numbered("w", 25);
    const auto ids = numbered("t", 40);
    testing::TempDir dir;
    models::write_model(dir / "a.json", models::train_nmf(sparse(X), vocab, ids, cfg));
    models::write_model(dir / "b.json", models::train_nmf(sparse(X), vocab, ids, cfg));
    c.expect(slurp(dir / "a.json") == slurp(dir / "b.json"), "artifacts differ under a fixed seed");
}

std::vector<std::string> blob_texts(std::size_t per_blob, std::uint64_t seed) {
    const std::vector<std::string> markers{"alpha", "bravo", "charlie"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 9);
    std::vector<std::string> texts;
    for (const auto& m : markers) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::string t = m + " " + m + " " + m;
            for (int j = 0; j < 5; ++j) t += fmt::format(" {}x{}", m.substr(0, 3), pick(rng));
            t += fmt::format(" shared{}", pick(rng));
            texts.push_back(std::move(t));
        }
    }
    return texts;
}

void embedding_path(Check& c) {
    const auto texts = blob_texts(50, 21);
    const models::RandomProjectionEmbedder embedder(64, 0);
    const auto model = models::train_embed_cluster(numbered("t", texts.size()), texts, {}, embedder);
    c.expect(model.num_topics() == 3, fmt::format("{} topics, expected 3", model.num_topics()));
    std::set<std::string> leaders;
    for (const auto& t : model.topics) {
        if (!t.keywords.empty()) leaders.insert(t.keywords.front().word);
    }
    c.expect(leaders == std::set<std::string>{"alpha", "bravo", "charlie"},
             "topics are not led by the three blob markers");

    const std::vector<std::string> few(texts.begin(), texts.begin() + 10);
    const auto tiny = models::train_embed_cluster(numbered("t", few.size()), few, {}, embedder);
    const auto outliers = std::count(tiny.labels.begin(), tiny.labels.end(), models::kOutlier);
    c.expect(tiny.num_topics() == 0 && outliers == 10,
             fmt::format("10 documents gave {} topics and {} outliers", tiny.num_topics(), outliers));
}

void selection_procedures(Check& c) {
    const auto peak = models::choose_topics_by_coherence([](int k) { return -std::fabs(k - 35.0); });
    c.expect(peak.best_k == 35, fmt::format("peaked stub chose K = {}", peak.best_k));
    const auto tie = models::choose_topics_by_coherence([](int k) { return k == 15 || k == 40 ? 0.61 : 0.2; });
    c.expect(tie.best_k == 15, fmt::format("tied stub chose K = {}, expected the smaller 15", tie.best_k));

    const std::vector<int> counts{31, 27, 35, 29, 40, 27, 33, 30, 28, 36, 29};
    const auto med = models::choose_topics_median(
        [&](int i, std::uint64_t) { return counts[static_cast<std::size_t>(i)]; }, 11);
    auto sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    c.expect(med.median == sorted[5], fmt::format("median {} expected {}", med.median, sorted[5]));
    double sum = 0.0, sum_sq = 0.0;
    for (const int k : counts) {
        sum += k;
        sum_sq += static_cast<double>(k) * k;
    }
    const double mean = sum / 11.0;
    const double sd = std::sqrt((sum_sq - 11.0 * mean * mean) / 10.0);
    c.near(med.mean, mean, 1e-12, "median-of-11 mean");
    c.near(med.std_dev, sd, 1e-12, "median-of-11 std");
}

// ---------------------------------------------------------------------------
// Metrics and ingest

void metric_identities(Check& c) {
    const std::vector<std::vector<std::string>> disjoint{{"a", "b", "c"}, {"d", "e", "f"}, {"g", "h", "i"}};
    c.expect(metrics::topic_diversity(disjoint, 3) == 1.0, "disjoint top words do not give diversity 1");
    for (int t = 1; t <= 5; ++t) {
        const std::vector<std::vector<std::string>> duplicated(static_cast<std::size_t>(t), {"a", "b", "c", "d"});
        c.near(metrics::topic_diversity(duplicated, 4), 1.0 / t, 1e-15, fmt::format("diversity of {} copies", t));
    }

    Eigen::VectorXd p(2), q(2);
    p << 0.5, 0.5;
    q << 0.25, 0.75;
    c.expect(metrics::kl_divergence(p, p) == 0.0, "KL(P||P) is not 0");
    c.near(metrics::kl_divergence(p, q), 0.1438, 1e-4, "KL hand case");

    models::TopicModelResult uniform;
    uniform.method = models::Method::Lda;
    uniform.vocabulary = numbered("w", 100);
    uniform.topic_word = Eigen::MatrixXd::Constant(1, 100, 0.01);
    uniform.doc_topic = Eigen::MatrixXd::Ones(1, 1);
    uniform.doc_ids = {"d0"};
    uniform.topics.push_back(models::Topic{0, {{"w0", 0.01}}, 1});
    const double ppl = metrics::perplexity(uniform, {{"d0", {"w3", "w42", "w99", "w0"}}});
    c.near(ppl, 100.0, 1e-6, "uniform-over-100 perplexity");
}

void ingest_fixture(Check& c) {
    constexpr int kSubmissions = 25;
    constexpr int kComments = 61;  // the last one is the orphan
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> which(0, kSubmissions - 1);
    std::uniform_int_distribution<std::int64_t> when(1'600'000'000, 1'600'100'000);
    std::vector<std::string> rs, rc;
    std::vector<std::vector<std::pair<std::int64_t, std::string>>> expected(kSubmissions);
    for (int s = 0; s < kSubmissions; ++s) {
        rs.push_back(fmt::format(R"({{"id":"s{}","title":"title{}","selftext":"","created_utc":{}}})", s, s,
                                 1'500'000'000 + s));
    }
    for (int i = 0; i < kComments - 1; ++i) {
        const int s = which(rng);
        const auto t = when(rng);
        const std::string body = fmt::format("body{}", i);
        expected[static_cast<std::size_t>(s)].emplace_back(t, body);
        rc.push_back(fmt::format(R"({{"id":"c{}","link_id":"t3_s{}","body":"{}","created_utc":{}}})", i, s, body, t));
    }
    rc.push_back(R"({"id":"lost","link_id":"t3_nowhere","body":"orphan","created_utc":1600000000})");
    std::shuffle(rc.begin(), rc.end(), rng);

    testing::TempDir dir;
    ingest::write_zstd_ndjson(dir / "RS_fixture.json.zst", rs);
    ingest::write_zstd_ndjson(dir / "RC_fixture.json.zst", rc);
    const auto [subs, comments] = ingest::find_dump_pair(dir.path(), "fixture");
    ingest::LoadReport report;
    const auto merged = ingest::load_threads(subs, comments, &report);

    c.expect(merged.threads.size() == kSubmissions, fmt::format("{} threads", merged.threads.size()));
    std::size_t attached = 0;
    for (const auto& t : merged.threads) attached += t.comment_count;
    c.expect(attached == kComments - 1, fmt::format("{} attached comments, expected {}", attached, kComments - 1));
    c.expect(merged.orphan_count == 1 && report.orphan_comments == 1,
             fmt::format("orphan count {}", merged.orphan_count));

    bool ordered = true;
    for (std::size_t s = 0; s < merged.threads.size(); ++s) {
        auto want = expected[s];
        std::sort(want.begin(), want.end());
        std::string text = fmt::format("title{}", s);
        for (const auto& [t, body] : want) text += " " + body;
        ordered = ordered && merged.threads[s].text == text;
    }
    c.expect(ordered, "comments are not attached in chronological order");
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::err);
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"stats oracle vs published tables", stats_vs_tables},
        {"descriptive reproduction", descriptive_reproduction},
        {"wilcoxon exactness", wilcoxon_exactness},
        {"friedman sanity", friedman_sanity},
        {"planted-topic recovery (LDA)", planted_lda},
        {"NMF properties", nmf_properties},
        {"embedding path with test embedder", embedding_path},
        {"selection procedures", selection_procedures},
        {"metric identities", metric_identities},
        {"ingest fixture", ingest_fixture},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Check check;
        const auto start = std::chrono::steady_clock::now();
        try {
            run(check);
        } catch (const std::exception& e) {
            check.expect(false, std::string("threw: ") + e.what());
        }
        const double secs = seconds_since(start);
        if (check.failures().empty()) {
            std::cout << fmt::format("PASS  {} ({:.2f}s)\n", name, secs);
        } else {
            ++failed;
            std::cout << fmt::format("FAIL  {} ({:.2f}s)\n", name, secs);
            for (const auto& f : check.failures()) std::cout << "        " << f << '\n';
        }
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
