#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "temp_dir.hpp"
#include "topicbench/error.hpp"
#include "topicbench/metrics.hpp"

using namespace topicbench;
using namespace topicbench::metrics;
using models::Keyword;
using models::Method;
using models::Topic;

namespace {

// C_v computed by materialising every window as a set.
double cv_oracle(const std::vector<std::vector<std::string>>& topics, const std::vector<TokenSet>& docs,
                 std::size_t window) {
    std::vector<std::set<std::string>> windows;
    for (const auto& d : docs) {
        const auto& t = d.tokens;
        if (t.empty()) continue;
        if (t.size() <= window) {
            windows.emplace_back(t.begin(), t.end());
            continue;
        }
        for (std::size_t s = 0; s + window <= t.size(); ++s) windows.emplace_back(t.begin() + s, t.begin() + s + window);
    }
    const double N = static_cast<double>(windows.size());
    const auto prob = [&](const std::string& a, const std::string& b) {
        double c = 0;
        for (const auto& w : windows) c += (w.count(a) && w.count(b)) ? 1 : 0;
        return c / N;
    };
    double total = 0;
    for (const auto& topic : topics) {
        const std::size_t m = topic.size();
        std::vector<std::vector<double>> v(m, std::vector<double>(m));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double pi = prob(topic[i], topic[i]);
                const double pj = prob(topic[j], topic[j]);
                const double pij = prob(topic[i], topic[j]);
                v[i][j] = (pi == 0 || pj == 0) ? 0.0 : std::log((pij + 1e-12) / (pi * pj)) / -std::log(pij + 1e-12);
            }
        }
        std::vector<double> sum(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) sum[j] += v[i][j];
        }
        double s = 0;
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0, na = 0, nb = 0;
            for (std::size_t j = 0; j < m; ++j) {
                dot += v[i][j] * sum[j];
                na += v[i][j] * v[i][j];
                nb += sum[j] * sum[j];
            }
            s += (na > 0 && nb > 0) ? dot / std::sqrt(na * nb) : 0.0;
        }
        total += s / static_cast<double>(m);
    }
    return total / static_cast<double>(topics.size());
}

std::vector<TokenSet> random_docs(std::size_t n, std::size_t vocab, std::size_t max_len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
    std::vector<TokenSet> docs;
    for (std::size_t d = 0; d < n; ++d) {
        TokenSet t{"d" + std::to_string(d), {}};
        const std::size_t l = len(rng);
        for (std::size_t i = 0; i < l; ++i) t.tokens.push_back("w" + std::to_string(word(rng)));
        docs.push_back(std::move(t));
    }
    return docs;
}

models::TopicModelResult keyword_model(const std::vector<std::vector<std::string>>& topics) {
    models::TopicModelResult r;
    r.method = Method::Nmf;
    for (std::size_t k = 0; k < topics.size(); ++k) {
        Topic t;
        t.id = static_cast<int>(k);
        double w = 1.0;
        for (const auto& word : topics[k]) t.keywords.push_back(Keyword{word, w -= 0.01});
        r.topics.push_back(t);
    }
    return r;
}

// Soft model with explicit memberships and topic-word rows.
models::TopicModelResult soft_model(const Eigen::MatrixXd& doc_topic, const Eigen::MatrixXd& topic_word,
                                    std::vector<std::string> vocab) {
    models::TopicModelResult r;
    r.method = Method::Nmf;
    r.doc_topic = doc_topic;
    r.topic_word = topic_word;
    r.vocabulary = std::move(vocab);
    for (Eigen::Index d = 0; d < doc_topic.rows(); ++d) r.doc_ids.push_back("d" + std::to_string(d));
    for (Eigen::Index k = 0; k < topic_word.rows(); ++k) {
        r.topics.push_back(Topic{static_cast<int>(k),
                                 models::top_keywords(topic_word.row(k).transpose(), r.vocabulary, 10), 0});
    }
    return r;
}

}  // namespace

TEST_CASE("coherence is near one when every window holds every topic word") {
    std::vector<TokenSet> docs;
    for (int d = 0; d < 5; ++d) docs.push_back(TokenSet{"d", {"a", "b", "c", "x"}});
    CHECK(topic_coherence({{"a", "b", "c"}}, docs) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("words that never co-occur score below words that always do") {
    std::vector<TokenSet> docs;
    for (int d = 0; d < 6; ++d) {
        docs.push_back(TokenSet{"p", {"a", "b", "c"}});
        docs.push_back(TokenSet{"q", {"x"}});
        docs.push_back(TokenSet{"r", {"y"}});
        docs.push_back(TokenSet{"s", {"z"}});
    }
    const double together = topic_coherence({{"a", "b", "c"}}, docs);
    const double apart = topic_coherence({{"x", "y", "z"}}, docs);
    CHECK(apart < together);
}

TEST_CASE("coherence matches a window-by-window oracle") {
    for (const std::size_t window : {3ul, 7ul, 110ul}) {
        const auto docs = random_docs(40, 12, 25, window);
        const std::vector<std::vector<std::string>> topics{
            {"w0", "w1", "w2", "w3"}, {"w4", "w5", "w6"}, {"w7", "w8", "w9", "w10", "w11"}, {"w1", "nope"}};
        CoherenceOptions opt;
        opt.window = window;
        CAPTURE(window);
        CHECK(topic_coherence(topics, docs, opt) == doctest::Approx(cv_oracle(topics, docs, window)).epsilon(1e-10));
    }
}

TEST_CASE("coherence is deterministic and validates its inputs") {
    const auto docs = random_docs(20, 8, 15, 1);
    const auto model = keyword_model({{"w0", "w1", "w2"}, {"w3", "w4"}});
    CHECK(topic_coherence(model, docs) == topic_coherence(model, docs));
    CHECK_THROWS_AS(topic_coherence(model, std::vector<TokenSet>{{"e", {}}}), ValidationError);
    CHECK_THROWS_AS(topic_coherence(keyword_model({}), docs), ValidationError);
}

TEST_CASE("diversity counts unique top words") {
    CHECK(topic_diversity({{"a", "b", "c"}, {"d", "e", "f"}}, 3) == 1.0);
    CHECK(topic_diversity({{"a", "b", "c"}, {"a", "b", "c"}}, 3) == 0.5);
    CHECK(topic_diversity({{"a", "b", "c"}, {"a", "d", "e"}}, 3) == doctest::Approx(5.0 / 6.0));
    CHECK(topic_diversity({{"a", "d", "e"}, {"a", "b", "c"}}, 3) == topic_diversity({{"a", "b", "c"}, {"a", "d", "e"}}, 3));
    CHECK(topic_diversity(keyword_model({{"a", "b", "c", "d"}, {"e", "f", "g", "h"}}), 2) == 1.0);
    CHECK_THROWS_AS(topic_diversity(std::vector<std::vector<std::string>>{}, 3), ValidationError);
}

TEST_CASE("KL divergence of explicit distributions") {
    Eigen::VectorXd p(2), q(2);
    p << 0.5, 0.5;
    q << 0.25, 0.75;
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)));
    CHECK(kl_divergence(p, q) == doctest::Approx(0.1438).epsilon(1e-3));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd a(6), b(6);
        for (int i = 0; i < 6; ++i) {
            a[i] = u(rng) < 0.2 ? 0.0 : u(rng);
            b[i] = u(rng) < 0.2 ? 0.0 : u(rng);
        }
        const double d = kl_divergence(a, b);
        CHECK(d >= 0.0);
        if (!(a / a.sum()).isApprox(b / b.sum(), 1e-9)) CHECK(d > 0.0);
    }
    CHECK_THROWS_AS(kl_divergence(Eigen::VectorXd(0), Eigen::VectorXd(0)), ValidationError);
}

TEST_CASE("KL divergence of a model against its corpus") {
    Eigen::MatrixXd tw(2, 2);
    tw << 2, 0, 0, 2;  // mean of normalised rows: [0.5, 0.5]
    const auto model = soft_model(Eigen::MatrixXd::Identity(2, 2), tw, {"a", "b"});
    // Corpus frequencies 1:3 plus an out-of-vocabulary word that is ignored.
    const std::vector<TokenSet> corpus{{"d0", {"a", "b", "b"}}, {"d1", {"b", "zz"}}};
    Eigen::VectorXd p(2), q(2);
    p << 0.25, 0.75;
    q << 0.5, 0.5;
    CHECK(kl_divergence(model, corpus) == doctest::Approx(kl_divergence(p, q)));
    CHECK_THROWS_AS(kl_divergence(model, std::vector<TokenSet>{{"d", {"zz"}}}), ValidationError);
}

TEST_CASE("perplexity closed forms") {
    std::vector<std::string> vocab;
    for (int w = 0; w < 100; ++w) vocab.push_back("w" + std::to_string(w));
    const auto uniform = soft_model(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 100), vocab);
    CHECK(perplexity(uniform, {{"d0", {"w1", "w7", "w99"}}}) == doctest::Approx(100.0).epsilon(1e-9));

    Eigen::MatrixXd half(1, 2);
    half << 0.5, 0.5;
    const auto two = soft_model(Eigen::MatrixXd::Ones(1, 1), half, {"a", "b"});
    CHECK(perplexity(two, {{"d0", {"a", "b"}}}) == doctest::Approx(2.0).epsilon(1e-9));

    Eigen::MatrixXd point(1, 2);
    point << 1.0, 0.0;
    const auto peaked = soft_model(Eigen::MatrixXd::Ones(1, 1), point, {"a", "b"});
    const double loose = perplexity(peaked, {{"d0", {"a", "a"}}}, 1e-3);
    const double tight = perplexity(peaked, {{"d0", {"a", "a"}}}, 1e-9);
    CHECK(tight < loose);
    CHECK(tight == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("perplexity uses document memberships and falls back to the mean") {
    Eigen::MatrixXd theta(2, 2);
    theta << 1, 0, 0, 1;
    Eigen::MatrixXd tw(2, 2);
    tw << 1, 0, 0, 1;
    const auto model = soft_model(theta, tw, {"a", "b"});
    // d0 predicts only "a": near-perfect; an unknown document uses [0.5, 0.5].
    CHECK(perplexity(model, {{"d0", {"a", "a"}}}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(perplexity(model, {{"unknown", {"a", "b"}}}) == doctest::Approx(2.0).epsilon(1e-9));
    // Concentrating on observed words lowers perplexity.
    CHECK(perplexity(model, {{"d0", {"a", "a"}}}) < perplexity(model, {{"d1", {"a", "a"}}}));
    // Out-of-vocabulary tokens receive only the reserved mass.
    CHECK(perplexity(model, {{"d0", {"zz"}}}, 1e-3) == doctest::Approx(3.0 / 1e-3));
    CHECK_THROWS_AS(perplexity(model, {{"d0", {}}}), ValidationError);
}

TEST_CASE("perplexity of an outlier-only embedding model is uniform") {
    models::TopicModelResult r;
    r.method = Method::Embed;
    r.vocabulary = {"a", "b", "c", "d"};
    r.doc_ids = {"d0"};
    r.labels = {-1};
    r.probabilities = {0.0};
    r.topic_word = Eigen::MatrixXd::Zero(0, 4);
    CHECK(perplexity(r, {{"d0", {"a", "c"}}}) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("timing wrapper") {
    const auto t = timed([] {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        return 7;
    });
    CHECK(t.value == 7);
    CHECK(t.seconds >= 0.1);
    CHECK(t.seconds <= 0.3);
    const double instant = timed([] {});
    CHECK(instant >= 0.0);
    const double again = timed([] { std::this_thread::sleep_for(std::chrono::milliseconds(20)); });
    CHECK(again >= 0.02);
    CHECK(again != instant);
    CHECK_THROWS_AS(timed([]() -> int { throw ConfigError("bad"); }), ConfigError);

    const auto model = timed_training([] {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        return models::TopicModelResult{};
    });
    CHECK(model.runtime_seconds >= 0.01);
}

TEST_CASE("evaluate fills every metric and reports round-trip") {
    Eigen::MatrixXd tw(2, 3);
    tw << 3, 1, 0, 0, 1, 3;
    Eigen::MatrixXd theta(2, 2);
    theta << 0.8, 0.2, 0.1, 0.9;
    auto model = soft_model(theta, tw, {"a", "b", "c"});
    model.runtime_seconds = 2.5;
    const std::vector<TokenSet> docs{{"d0", {"a", "a", "b"}}, {"d1", {"c", "b", "c"}}};
    const auto r = evaluate(model, "ds", docs, docs);
    CHECK(r.method == "NMF");
    CHECK(r.num_topics == 2);
    CHECK(r.runtime_seconds == 2.5);
    CHECK(std::isfinite(r.coherence));
    CHECK(r.diversity == doctest::Approx(3.0 / 20.0));
    CHECK(r.kl_divergence >= 0.0);
    CHECK(r.perplexity >= 1.0);

    models::TopicModelResult empty;
    empty.method = Method::Embed;
    empty.vocabulary = {"a"};
    empty.doc_ids = {"d0"};
    empty.labels = {-1};
    empty.probabilities = {0.0};
    empty.topic_word = Eigen::MatrixXd::Zero(0, 1);
    const auto e = evaluate(empty, "ds", docs, docs);
    CHECK(std::isnan(e.coherence));
    CHECK(std::isnan(e.diversity));

    testing::TempDir dir;
    write_metrics_json(dir / "metrics_ds.json", {r, e});
    const auto back = read_metrics_json(dir / "metrics_ds.json");
    REQUIRE(back.size() == 2);
    CHECK(back[0].coherence == r.coherence);
    CHECK(std::isnan(back[1].coherence));
    CHECK(back[1].method == "EMBED");
}

TEST_CASE("metric tables put datasets in rows and methods in columns") {
    std::vector<MetricsReport> reports;
    for (const std::string ds : {"alpha", "beta"}) {
        for (const std::string m : {"LDA", "NMF", "EMBED"}) {
            MetricsReport r;
            r.dataset = ds;
            r.method = m;
            r.diversity = m == "EMBED" ? 1.0 : 0.5;
            r.coherence = m == "EMBED" && ds == "beta" ? std::nan("") : 0.25;
            reports.push_back(r);
        }
    }
    CHECK(metric_table_csv(reports, "diversity") == "dataset,LDA,NMF,EMBED\nalpha,0.5,0.5,1\nbeta,0.5,0.5,1\n");
    CHECK(metric_table_csv(reports, "coherence") == "dataset,LDA,NMF,EMBED\nalpha,0.25,0.25,0.25\nbeta,0.25,0.25,\n");
    CHECK_THROWS_AS(metric_table_csv(reports, "bogus"), ConfigError);
}
