#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include "temp_dir.hpp"
#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"
#include "topicbench/models.hpp"
#include "topicbench/selection.hpp"

using namespace topicbench;
using namespace topicbench::models;
using preprocess::TokenSet;

namespace {

std::vector<TokenSet> token_sets(const std::vector<std::vector<std::string>>& docs) {
    std::vector<TokenSet> out;
    for (std::size_t i = 0; i < docs.size(); ++i) out.push_back(TokenSet{"d" + std::to_string(i), docs[i]});
    return out;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.dot(b) / (a.norm() * b.norm());
}

SparseMatrix to_sparse(const Eigen::MatrixXd& m) {
    SparseMatrix s = m.sparseView();
    s.makeCompressed();
    return s;
}

// Two planted topics over disjoint halves of a 50-word vocabulary.
struct PlantedCorpus {
    std::vector<TokenSet> docs;
    Eigen::MatrixXd phi;  // 2 x 50, over words w00..w49
};

PlantedCorpus planted_two_topics(std::size_t n_docs, std::size_t doc_len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    PlantedCorpus pc;
    pc.phi = Eigen::MatrixXd::Zero(2, 50);
    for (int w = 0; w < 25; ++w) {
        pc.phi(0, w) = 1.0 + (w % 5);
        pc.phi(1, 25 + w) = 1.0 + ((w * 3) % 7);
    }
    for (int k = 0; k < 2; ++k) pc.phi.row(k) /= pc.phi.row(k).sum();
    std::vector<std::discrete_distribution<int>> word_dist;
    for (int k = 0; k < 2; ++k) {
        Eigen::RowVectorXd r = pc.phi.row(k);
        word_dist.emplace_back(r.data(), r.data() + r.size());
    }
    std::uniform_real_distribution<double> mix(0.0, 1.0);
    for (std::size_t d = 0; d < n_docs; ++d) {
        const double p = mix(rng) < 0.5 ? 0.9 : 0.1;
        TokenSet ts{"doc" + std::to_string(d), {}};
        for (std::size_t i = 0; i < doc_len; ++i) {
            const int k = mix(rng) < p ? 0 : 1;
            const int w = word_dist[static_cast<std::size_t>(k)](rng);
            ts.tokens.push_back((w < 10 ? "w0" : "w") + std::to_string(w));
        }
        pc.docs.push_back(std::move(ts));
    }
    return pc;
}

// Three blobs of documents, each dominated by its own marker and word pool.
std::vector<std::string> blob_texts(std::size_t per_blob, std::uint64_t seed) {
    const std::vector<std::string> markers{"alpha", "bravo", "charlie"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 9);
    std::vector<std::string> texts;
    for (std::size_t b = 0; b < markers.size(); ++b) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::string t = markers[b] + " " + markers[b] + " " + markers[b];
            for (int j = 0; j < 5; ++j) t += " " + markers[b].substr(0, 3) + "x" + std::to_string(pick(rng));
            t += " shared" + std::to_string(pick(rng));
            texts.push_back(t);
        }
    }
    return texts;
}

std::vector<std::string> numbered_ids(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("t" + std::to_string(i));
    return ids;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary and bag of words

TEST_CASE("vocabulary assigns dense ids and counts documents") {
    const auto v = build_vocabulary(token_sets({{"a", "b"}, {"b", "c"}}));
    CHECK(v.size() == 3);
    REQUIRE(v.id("b").has_value());
    CHECK(v.document_frequency(*v.id("b")) == 2);
    CHECK(v.token(0) == "a");
    CHECK_FALSE(v.id("zzz").has_value());

    const auto single = build_vocabulary(token_sets({{"a", "a"}}));
    CHECK(single.size() == 1);
    CHECK(single.document_frequency(0) == 1);
}

TEST_CASE("vocabulary document frequencies match a brute-force recount") {
    const std::vector<std::vector<std::string>> docs{
        {"cat", "dog", "cat", "fish"}, {"dog", "bird"}, {"fish", "fish", "cat", "eel"}};
    const auto v = build_vocabulary(token_sets(docs));
    std::set<std::string> distinct;
    for (const auto& d : docs) distinct.insert(d.begin(), d.end());
    CHECK(v.size() == distinct.size());
    for (const auto& w : distinct) {
        std::size_t df = 0;
        for (const auto& d : docs) df += std::count(d.begin(), d.end(), w) > 0 ? 1 : 0;
        REQUIRE(v.id(w).has_value());
        CHECK(v.document_frequency(*v.id(w)) == df);
    }
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_WITH_AS(build_vocabulary(token_sets({{}, {}})), "empty corpus", ValidationError);
    CHECK_THROWS_AS(build_vocabulary({}), ValidationError);
}

TEST_CASE("bag of words keeps counts and skips unknown tokens") {
    const auto sets = token_sets({{"b", "a", "b"}, {"c"}});
    const auto v = build_vocabulary(sets);
    const auto bow = to_bow(token_sets({{"b", "a", "b", "zz"}}), v);
    REQUIRE(bow.docs.size() == 1);
    const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 1}, {1, 2}};
    CHECK(bow.docs[0] == expected);
    CHECK(bow.num_tokens() == 3);
}

TEST_CASE("method names parse case-insensitively") {
    CHECK(parse_method("lda") == Method::Lda);
    CHECK(parse_method("NMF") == Method::Nmf);
    CHECK(parse_method("BERTopic") == Method::Embed);
    CHECK(method_name(Method::Embed) == "EMBED");
    CHECK_THROWS_AS(parse_method("top2vec"), ConfigError);
}

// ---------------------------------------------------------------------------
// LDA

TEST_CASE("single-topic LDA reduces to smoothed relative frequencies") {
    const auto sets = token_sets({{"a", "b", "a"}, {"c", "a"}, {"b", "b", "d"}});
    const auto v = build_vocabulary(sets);
    const auto bow = to_bow(sets, v);
    LdaConfig cfg;
    cfg.num_topics = 1;
    cfg.eta_auto = false;
    cfg.eta = 0.5;
    cfg.workers = 1;
    const auto r = train_lda(bow, v.tokens(), cfg);
    REQUIRE(r.num_topics() == 1);
    for (Eigen::Index d = 0; d < r.doc_topic.rows(); ++d) CHECK(r.doc_topic(d, 0) == doctest::Approx(1.0));
    // a:3 b:3 c:1 d:1 over 8 tokens.
    const std::map<std::string, double> counts{{"a", 3}, {"b", 3}, {"c", 1}, {"d", 1}};
    for (const auto& [w, c] : counts) {
        CHECK(r.topic_word(0, static_cast<Eigen::Index>(*v.id(w))) == doctest::Approx((c + 0.5) / (8 + 4 * 0.5)));
    }
}

TEST_CASE("single-topic LDA with learned eta stays close to corpus frequencies") {
    const auto pc = planted_two_topics(200, 40, 3);
    const auto v = build_vocabulary(pc.docs);
    const auto bow = to_bow(pc.docs, v);
    LdaConfig cfg;
    cfg.num_topics = 1;
    cfg.workers = 1;
    const auto r = train_lda(bow, v.tokens(), cfg);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.size()));
    for (const auto& doc : bow.docs) {
        for (const auto& [id, c] : doc) freq[static_cast<Eigen::Index>(id)] += static_cast<double>(c);
    }
    freq /= freq.sum();
    CHECK((r.topic_word.row(0).transpose() - freq).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("LDA recovers planted topics") {
    const auto pc = planted_two_topics(500, 50, 11);
    const auto v = build_vocabulary(pc.docs);
    const auto bow = to_bow(pc.docs, v);
    REQUIRE(v.size() == 50);
    LdaConfig cfg;
    cfg.num_topics = 2;
    cfg.workers = 1;
    const auto start = std::chrono::steady_clock::now();
    const auto r = train_lda(bow, v.tokens(), cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 60.0);
    r.validate();

    // Planted rows are indexed w00..w49, which is also the lexicographic order.
    std::vector<bool> used(2, false);
    for (int p = 0; p < 2; ++p) {
        double best = -1.0;
        int arg = -1;
        for (int k = 0; k < 2; ++k) {
            if (used[static_cast<std::size_t>(k)]) continue;
            const double c = cosine(pc.phi.row(p).transpose(), r.topic_word.row(k).transpose());
            if (c > best) {
                best = c;
                arg = k;
            }
        }
        used[static_cast<std::size_t>(arg)] = true;
        CHECK(best >= 0.9);
    }
}

TEST_CASE("LDA is deterministic for a fixed seed and worker count") {
    const auto pc = planted_two_topics(120, 30, 5);
    const auto v = build_vocabulary(pc.docs);
    const auto bow = to_bow(pc.docs, v);
    for (const int workers : {1, 3}) {
        LdaConfig cfg;
        cfg.num_topics = 4;
        cfg.workers = workers;
        cfg.passes = 3;
        const auto a = train_lda(bow, v.tokens(), cfg);
        const auto b = train_lda(bow, v.tokens(), cfg);
        CHECK(a == b);
        for (std::size_t k = 0; k < a.num_topics(); ++k) CHECK(a.topics[k].keywords == b.topics[k].keywords);
        a.validate();
    }
}

TEST_CASE("LDA rows are simplices and keywords descend") {
    const auto pc = planted_two_topics(80, 20, 9);
    const auto v = build_vocabulary(pc.docs);
    const auto bow = to_bow(pc.docs, v);
    LdaConfig cfg;
    cfg.num_topics = 5;
    cfg.workers = 2;
    cfg.passes = 2;
    const auto r = train_lda(bow, v.tokens(), cfg);
    for (Eigen::Index d = 0; d < r.doc_topic.rows(); ++d) CHECK(std::abs(r.doc_topic.row(d).sum() - 1.0) < 1e-6);
    for (Eigen::Index k = 0; k < r.topic_word.rows(); ++k) CHECK(std::abs(r.topic_word.row(k).sum() - 1.0) < 1e-6);
    for (const auto& t : r.topics) {
        CHECK(t.keywords.size() == 10);
        for (std::size_t i = 1; i < t.keywords.size(); ++i) CHECK(t.keywords[i - 1].weight >= t.keywords[i].weight);
    }
    CHECK(r.diagnostics.at("eta_updates").get<int>() > 0);
}

TEST_CASE("LDA rejects more topics than documents") {
    const auto sets = token_sets({{"a", "b"}, {"c"}});
    const auto v = build_vocabulary(sets);
    LdaConfig cfg;
    cfg.num_topics = 3;
    CHECK_THROWS_AS(train_lda(to_bow(sets, v), v.tokens(), cfg), ConfigError);
    cfg.num_topics = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.num_topics = 2;
    cfg.workers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("LDA config round-trips through JSON") {
    LdaConfig cfg;
    cfg.num_topics = 7;
    cfg.eta_auto = false;
    cfg.eta = 0.2;
    cfg.workers = 3;
    const nlohmann::json j = cfg;
    CHECK(j.at("eta") == 0.2);
    const auto back = j.get<LdaConfig>();
    CHECK(back.num_topics == 7);
    CHECK_FALSE(back.eta_auto);
    CHECK(back.eta.value() == 0.2);
    CHECK(back.workers == 3);
    CHECK(LdaConfig::default_workers() >= 1);
}

// ---------------------------------------------------------------------------
// NMF

TEST_CASE("NMF recovers an exact rank-one matrix") {
    Eigen::MatrixXd X(2, 2);
    X << 1, 2, 2, 4;
    NmfConfig cfg;
    cfg.num_topics = 1;
    cfg.max_iter = 500;
    const auto f = factorize_nmf(to_sparse(X), cfg);
    CHECK((X - f.W * f.H).norm() / X.norm() < 1e-3);
}

TEST_CASE("NMF objective never increases and factors stay nonnegative") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(30, 20);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(rng) < 0.4 ? u(rng) : 0.0;
    NmfConfig cfg;
    cfg.num_topics = 4;
    cfg.tol = 1e-9;
    const auto f = factorize_nmf(to_sparse(X), cfg);
    REQUIRE(f.objective.size() >= 2);
    for (std::size_t i = 1; i < f.objective.size(); ++i) {
        CHECK(f.objective[i] <= f.objective[i - 1] + 1e-12 * f.objective[0]);
    }
    CHECK((f.W.array() >= 0.0).all());
    CHECK((f.H.array() >= 0.0).all());
    // The recorded objective matches a direct evaluation.
    CHECK(f.objective.back() == doctest::Approx(0.5 * (X - f.W * f.H).squaredNorm()).epsilon(1e-9));
}

TEST_CASE("NMF is deterministic and its artifact is byte-identical across runs") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd X(12, 8);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = u(rng);
    std::vector<std::string> vocab;
    for (int w = 0; w < 8; ++w) vocab.push_back("w" + std::to_string(w));
    NmfConfig cfg;
    cfg.num_topics = 3;
    const auto a = train_nmf(to_sparse(X), vocab, numbered_ids(12), cfg);
    auto b = train_nmf(to_sparse(X), vocab, numbered_ids(12), cfg);
    b.runtime_seconds = 3.0;
    CHECK(a == b);
    CHECK(a.doc_topic == b.doc_topic);
    testing::TempDir dir;
    write_model(dir / "a.json", a);
    write_model(dir / "b.json", b);
    const auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    cfg.seed = 43;
    const auto c = train_nmf(to_sparse(X), vocab, numbered_ids(12), cfg);
    CHECK_FALSE(c.doc_topic == a.doc_topic);
}

TEST_CASE("NMF validates its input") {
    Eigen::MatrixXd X(2, 2);
    X << 1, -2, 2, 4;
    NmfConfig cfg;
    cfg.num_topics = 1;
    CHECK_THROWS_AS(factorize_nmf(to_sparse(X), cfg), ValidationError);
    X(0, 1) = 2;
    cfg.num_topics = 3;
    CHECK_THROWS_AS(factorize_nmf(to_sparse(X), cfg), ConfigError);
    cfg.num_topics = 1;
    cfg.tol = 0;
    CHECK_THROWS_AS(factorize_nmf(to_sparse(X), cfg), ConfigError);
}

TEST_CASE("model artifacts round-trip") {
    const auto pc = planted_two_topics(40, 15, 2);
    const auto v = build_vocabulary(pc.docs);
    LdaConfig cfg;
    cfg.num_topics = 2;
    cfg.passes = 1;
    cfg.workers = 1;
    auto r = train_lda(to_bow(pc.docs, v), v.tokens(), cfg);
    r.runtime_seconds = 1.25;
    testing::TempDir dir;
    write_model(dir / "model_lda_x.json", r);
    const auto back = read_model(dir / "model_lda_x.json");
    CHECK(back == r);
    // Wall-clock time lives in the metrics file so reruns stay byte-identical.
    CHECK(back.runtime_seconds == 0.0);
    CHECK_THROWS_AS(read_model(dir / "missing.json"), NotFoundError);
    std::ofstream(dir / "bad.json") << "{\"method\": \"LDA\"}";
    CHECK_THROWS_AS(read_model(dir / "bad.json"), ValidationError);
}

// ---------------------------------------------------------------------------
// c-TF-IDF

TEST_CASE("c-TF-IDF matches hand evaluation") {
    // Classes A = {x:2, y:2}, B = {y:4}; columns x, y.
    Eigen::MatrixXd counts(2, 2);
    counts << 2, 2, 0, 4;
    const auto w = compute_ctfidf(counts);
    CHECK(w(0, 0) == doctest::Approx(2.0 * std::log(3.0)));
    CHECK(w(0, 0) == doctest::Approx(2.197).epsilon(1e-3));
    CHECK(w(1, 0) == 0.0);
    CHECK(w(1, 1) == doctest::Approx(4.0 * std::log(1.0 + 4.0 / 6.0)));

    Eigen::MatrixXd single(1, 2);
    single << 3, 1;
    const auto s = compute_ctfidf(single);
    CHECK(s(0, 0) == doctest::Approx(3.0 * std::log(1.0 + 4.0 / 3.0)));
    CHECK(s(0, 1) == doctest::Approx(std::log(5.0)));

    CHECK_THROWS_AS(compute_ctfidf(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
    counts(0, 0) = -1;
    CHECK_THROWS_AS(compute_ctfidf(counts), ValidationError);
}

// ---------------------------------------------------------------------------
// Manifold reduction and density clustering

TEST_CASE("curve parameters match a least-squares reference") {
    // Reference values from scipy.optimize.curve_fit on the same target.
    const struct {
        double min_dist, a, b;
    } ref[] = {{0.0, 1.9328084, 0.79049497}, {0.1, 1.57694346, 0.89506088}, {0.5, 0.58303002, 1.33416699}};
    for (const auto& r : ref) {
        const auto [a, b] = fit_ab(1.0, r.min_dist);
        CHECK(a == doctest::Approx(r.a).epsilon(1e-3));
        CHECK(b == doctest::Approx(r.b).epsilon(1e-3));
    }
}

TEST_CASE("exact kNN matches brute force") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(37, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = g(rng);
    for (const auto metric : {Metric::Euclidean, Metric::Cosine}) {
        const auto knn = exact_knn(X, 5, metric);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::vector<std::pair<double, int>> all;
            for (Eigen::Index j = 0; j < X.rows(); ++j) {
                if (j == i) continue;
                const double d = metric == Metric::Euclidean
                                     ? (X.row(i) - X.row(j)).norm()
                                     : 1.0 - X.row(i).dot(X.row(j)) / (X.row(i).norm() * X.row(j).norm());
                all.emplace_back(d, static_cast<int>(j));
            }
            std::sort(all.begin(), all.end());
            for (int k = 0; k < 5; ++k) {
                CHECK(knn.indices[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] ==
                      all[static_cast<std::size_t>(k)].second);
                CHECK(knn.distances[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] ==
                      doctest::Approx(all[static_cast<std::size_t>(k)].first));
            }
        }
    }
    CHECK_THROWS_AS(exact_knn(X, 37, Metric::Euclidean), ValidationError);
}

TEST_CASE("fuzzy graph is symmetric with weights in (0, 1]") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(25, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = g(rng);
    const auto graph = fuzzy_simplicial_set(exact_knn(X, 4, Metric::Euclidean), 25);
    std::map<std::pair<int, int>, double> w;
    for (std::size_t e = 0; e < graph.head.size(); ++e) {
        CHECK(graph.weight[e] > 0.0);
        CHECK(graph.weight[e] <= 1.0 + 1e-12);
        CHECK(w.emplace(std::make_pair(graph.head[e], graph.tail[e]), graph.weight[e]).second);
    }
    for (const auto& [edge, weight] : w) {
        const auto rev = w.find({edge.second, edge.first});
        REQUIRE(rev != w.end());
        CHECK(rev->second == weight);
    }
}

TEST_CASE("UMAP reduction is deterministic and keeps separated groups apart") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 0.05);
    Eigen::MatrixXd X(60, 10);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) X(i, c) = g(rng) + (c == i / 20 ? 1.0 : 0.0);
    }
    UmapConfig cfg;
    cfg.n_neighbors = 10;
    cfg.n_components = 2;
    cfg.n_epochs = 200;
    const auto Y = umap_reduce(X, cfg);
    CHECK(Y == umap_reduce(X, cfg));
    CHECK(Y.allFinite());
    // Every point's nearest neighbour in the embedding is from its own group.
    const auto knn = exact_knn(Y, 1, Metric::Euclidean);
    for (int i = 0; i < 60; ++i) CHECK(knn.indices[static_cast<std::size_t>(i)][0] / 20 == i / 20);
}

TEST_CASE("HDBSCAN matches the reference implementation") {
    std::ifstream in(std::string(TOPICBENCH_TEST_DATA) + "/hdbscan_reference.json");
    REQUIRE(in);
    const auto ref = nlohmann::json::parse(in);
    const auto pts = ref.at("points").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = pts[i][0];
        X(static_cast<Eigen::Index>(i), 1) = pts[i][1];
    }
    for (const auto& c : ref.at("cases")) {
        HdbscanConfig cfg;
        cfg.min_cluster_size = c.at("min_cluster_size").get<int>();
        cfg.min_samples = c.at("min_samples").get<int>();
        CAPTURE(cfg.min_cluster_size);
        const auto got = hdbscan(X, cfg);
        const auto labels = c.at("labels").get<std::vector<int>>();
        const auto probs = c.at("probabilities").get<std::vector<double>>();
        // Same partition up to a relabelling.
        std::map<int, int> fwd;
        std::map<int, int> back;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            CHECK((labels[i] == -1) == (got.labels[i] == -1));
            if (labels[i] == -1) continue;
            CHECK(fwd.emplace(labels[i], got.labels[i]).first->second == got.labels[i]);
            CHECK(back.emplace(got.labels[i], labels[i]).first->second == labels[i]);
            CHECK(got.probabilities[i] == doctest::Approx(probs[i]).epsilon(1e-9));
        }
        CHECK(got.num_clusters == static_cast<int>(fwd.size()));
    }
}

TEST_CASE("HDBSCAN edge cases") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 2);
    HdbscanConfig cfg;
    cfg.min_cluster_size = 5;
    const auto small = hdbscan(X, cfg);
    CHECK(small.num_clusters == 0);
    CHECK(std::all_of(small.labels.begin(), small.labels.end(), [](int l) { return l == -1; }));
    cfg.min_cluster_size = 1;
    CHECK_THROWS_AS(hdbscan(X, cfg), ConfigError);

    // One tight group: a single cluster only when explicitly allowed.
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::MatrixXd one(30, 2);
    for (Eigen::Index i = 0; i < one.size(); ++i) one(i) = g(rng);
    cfg.min_cluster_size = 5;
    cfg.allow_single_cluster = true;
    CHECK(hdbscan(one, cfg).num_clusters >= 1);
}

// ---------------------------------------------------------------------------
// Embedding + clustering

TEST_CASE("random projection embedder is deterministic and normalised") {
    const RandomProjectionEmbedder e(64, 3);
    const auto a = e.embed({"apple banana", "banana apple", "cherry", ""});
    CHECK(a.cols() == 64);
    CHECK(a.row(0).norm() == doctest::Approx(1.0));
    CHECK(a.row(0).isApprox(a.row(1)));
    CHECK(a.row(3).norm() == 0.0);
    CHECK(a == e.embed({"apple banana", "banana apple", "cherry", ""}));
    CHECK_FALSE(a.row(0).isApprox(RandomProjectionEmbedder(64, 4).embed({"apple banana"}).row(0)));
}

TEST_CASE("embedder factory validates configuration") {
    CHECK(make_embedder({{"backend", "random_projection"}, {"dimension", 32}})->dimension() == 32);
    CHECK(make_embedder({{"backend", "http"}, {"url", "http://localhost:9/embed"}, {"dimension", 8}})->name() ==
          "http");
    CHECK_THROWS_AS(make_embedder({{"backend", "http"}, {"url", "ftp://x"}, {"dimension", 8}}), ConfigError);
    CHECK_THROWS_AS(make_embedder({{"backend", "nope"}}), ConfigError);
}

TEST_CASE("http embedder surfaces connection failures as pipeline errors") {
    const HttpEmbedder e("http://127.0.0.1:1/v1/embeddings", "m", 4);
    CHECK_THROWS_AS(e.embed({"hello"}), PipelineError);
}

TEST_CASE("three planted blobs give three topics led by their markers") {
    const auto texts = blob_texts(50, 21);
    const RandomProjectionEmbedder embedder(64, 0);
    EmbedClusterConfig cfg;
    const auto r = train_embed_cluster(numbered_ids(texts.size()), texts, cfg, embedder);
    r.validate();
    REQUIRE(r.num_topics() == 3);
    std::set<std::string> leaders;
    for (const auto& t : r.topics) {
        leaders.insert(t.keywords.at(0).word);
        CHECK(t.size >= 15);
    }
    CHECK(leaders == std::set<std::string>{"alpha", "bravo", "charlie"});
    // Each blob maps to a single topic whose leader is the blob's marker.
    for (std::size_t d = 0; d < texts.size(); ++d) {
        const int l = r.labels[d];
        if (l == kOutlier) continue;
        CHECK(texts[d].substr(0, texts[d].find(' ')) == r.topics[static_cast<std::size_t>(l)].keywords[0].word);
    }
}

TEST_CASE("fewer documents than the minimum cluster size are all outliers") {
    const auto texts = blob_texts(50, 4);
    const std::vector<std::string> ten(texts.begin(), texts.begin() + 10);
    const RandomProjectionEmbedder embedder;
    const auto r = train_embed_cluster(numbered_ids(10), ten, EmbedClusterConfig{}, embedder);
    CHECK(r.num_topics() == 0);
    CHECK(std::count(r.labels.begin(), r.labels.end(), kOutlier) == 10);
    r.validate();
}

TEST_CASE("embedding trainer is deterministic") {
    const auto texts = blob_texts(30, 8);
    const RandomProjectionEmbedder embedder(64, 1);
    EmbedClusterConfig cfg;
    cfg.min_cluster_size = 10;
    const auto a = train_embed_cluster(numbered_ids(texts.size()), texts, cfg, embedder);
    const auto b = train_embed_cluster(numbered_ids(texts.size()), texts, cfg, embedder);
    CHECK(a == b);
}

TEST_CASE("embedding config validation") {
    EmbedClusterConfig cfg;
    CHECK_NOTHROW(cfg.validate(64));
    CHECK_THROWS_AS(cfg.validate(5), ConfigError);
    cfg.min_cluster_size = 1;
    CHECK_THROWS_AS(cfg.validate(64), ConfigError);
    cfg = EmbedClusterConfig{};
    cfg.nr_topics = "many";
    CHECK_THROWS_AS(cfg.validate(64), ConfigError);
    cfg.nr_topics = "12";
    CHECK_NOTHROW(cfg.validate(64));
    const nlohmann::json j = EmbedClusterConfig{};
    CHECK(j.at("nr_topics") == "auto");
    const auto back = nlohmann::json{{"nr_topics", 8}, {"min_cluster_size", 20}}.get<EmbedClusterConfig>();
    CHECK(back.nr_topics == "8");
    CHECK(back.min_cluster_size == 20);
}

TEST_CASE("topic merging joins near-duplicate topics and respects a cap") {
    // Topics 0 and 1 share vocabulary; topic 2 is distinct; doc 6 is an outlier.
    Eigen::MatrixXd counts(7, 4);
    counts << 3, 1, 0, 0,  //
        3, 1, 0, 0,        //
        6, 2, 0, 0,        //
        0, 0, 2, 2,        //
        0, 0, 2, 2,        //
        0, 0, 2, 1,        //
        1, 1, 1, 1;
    const std::vector<int> labels{0, 0, 1, 2, 2, 2, -1};
    const auto merged = merge_similar_topics(labels, to_sparse(counts), 0.85);
    const std::vector<int> expected{1, 1, 1, 0, 0, 0, -1};
    CHECK(merged == expected);

    const auto none = merge_similar_topics(labels, to_sparse(counts), 1.0 + 1e-9);
    CHECK(none == std::vector<int>{1, 1, 2, 0, 0, 0, -1});

    const auto capped = merge_similar_topics(labels, to_sparse(counts), 1.0, 1);
    CHECK(capped == std::vector<int>{0, 0, 0, 0, 0, 0, -1});
}

// ---------------------------------------------------------------------------
// Topic-count selection

TEST_CASE("coherence sweep picks the argmax with smaller-K ties") {
    const auto peak = choose_topics_by_coherence([](int k) { return -std::abs(k - 15.0); });
    CHECK(peak.best_k == 15);
    CHECK(peak.curve.size() == 10);

    CHECK(choose_topics_by_coherence([](int k) { return static_cast<double>(k); }).best_k == 50);

    const auto tie = choose_topics_by_coherence([](int k) { return k == 10 || k == 20 ? 0.7 : 0.1; });
    CHECK(tie.best_k == 10);
    CHECK(tie.best_coherence == 0.7);
    CHECK(default_topic_grid() == std::vector<int>{5, 10, 15, 20, 25, 30, 35, 40, 45, 50});
}

TEST_CASE("coherence sweep skips failing grid points") {
    auto sink = std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(16);
    auto logger = std::make_shared<spdlog::logger>("capture", sink);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    const auto s = choose_topics_by_coherence([](int k) {
        if (k == 25) throw std::runtime_error("boom");
        return k == 25 ? 10.0 : static_cast<double>(k % 20);
    });
    spdlog::set_default_logger(previous);
    CHECK(s.best_k == 15);
    CHECK_FALSE(s.curve.at(25).has_value());
    const auto lines = sink->last_formatted();
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].find("K=25") != std::string::npos);

    CHECK_THROWS_AS(choose_topics_by_coherence([](int) -> double { throw std::runtime_error("x"); }), PipelineError);
}

TEST_CASE("median selection over eleven runs") {
    const auto same = choose_topics_median([](int, std::uint64_t) { return 56; });
    CHECK(same.median == 56);
    CHECK(same.std_dev == 0.0);
    CHECK(same.seeds.size() == 11);
    CHECK(std::set<std::uint64_t>(same.seeds.begin(), same.seeds.end()).size() == 11);

    const std::vector<int> counts{23, 30, 22, 26, 24, 20, 25, 22, 27, 23, 24};
    const auto s = choose_topics_median([&](int i, std::uint64_t) { return counts[static_cast<std::size_t>(i)]; });
    CHECK(s.median == 24);
    CHECK(std::find(counts.begin(), counts.end(), s.median) != counts.end());
    // Independent recomputation through raw moments.
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const int c : counts) {
        sum += c;
        sum_sq += static_cast<double>(c) * c;
    }
    const double mean = sum / 11.0;
    CHECK(s.mean == doctest::Approx(mean));
    CHECK(s.std_dev == doctest::Approx(std::sqrt((sum_sq - 11.0 * mean * mean) / 10.0)));
}

TEST_CASE("median selection reports the failing run") {
    CHECK_THROWS_WITH_AS(choose_topics_median([](int i, std::uint64_t) -> int {
                             if (i == 4) throw std::runtime_error("oom");
                             return 3;
                         }),
                         doctest::Contains("run 4"), PipelineError);
    CHECK_THROWS_AS(choose_topics_median([](int, std::uint64_t) { return 1; }, 10), ConfigError);
}
