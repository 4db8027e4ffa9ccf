#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "fixture_corpus.hpp"
#include "temp_dir.hpp"
#include "topicbench/error.hpp"
#include "topicbench/stats.hpp"
#include "topicbench/workbench.hpp"

using namespace topicbench;
using namespace topicbench::workbench;
using models::Method;
namespace fs = std::filesystem;

namespace {

TopicModelResult soft_model(const Eigen::MatrixXd& doc_topic) {
    TopicModelResult m;
    m.method = Method::Lda;
    const auto k = doc_topic.cols();
    m.doc_topic = doc_topic;
    for (Eigen::Index d = 0; d < doc_topic.rows(); ++d) m.doc_ids.push_back("d" + std::to_string(d));
    m.vocabulary = {"w0", "w1"};
    m.topic_word = Eigen::MatrixXd::Constant(k, 2, 0.5);
    for (Eigen::Index t = 0; t < k; ++t)
        m.topics.push_back({static_cast<int>(t), {{"w0", 0.5}, {"w1", 0.5}}, 0});
    return m;
}

TopicModelResult hard_model(const std::vector<int>& labels, int k) {
    TopicModelResult m;
    m.method = Method::Embed;
    m.labels = labels;
    m.probabilities.assign(labels.size(), 1.0);
    for (std::size_t d = 0; d < labels.size(); ++d) m.doc_ids.push_back("d" + std::to_string(d));
    m.vocabulary = {"w0"};
    m.topic_word = Eigen::MatrixXd::Ones(k, 1);
    for (int t = 0; t < k; ++t) m.topics.push_back({t, {{"w0", 1.0}}, 0});
    return m;
}

// Independent double loop over documents for every topic pair.
std::map<std::pair<int, int>, std::size_t> brute_force_edges(const Eigen::MatrixXd& dt, double tau) {
    std::map<std::pair<int, int>, std::size_t> out;
    for (int a = 0; a < dt.cols(); ++a)
        for (int b = a + 1; b < dt.cols(); ++b) {
            std::size_t n = 0;
            for (int d = 0; d < dt.rows(); ++d)
                if (dt(d, a) >= tau && dt(d, b) >= tau) ++n;
            if (n > 0) out[{a, b}] = n;
        }
    return out;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// One fixture pipeline shared by the slower cases.
struct FixtureRun {
    testing::TempDir dir;
    Workspace ws{dir / "ws"};
    RunManifest manifest;

    FixtureRun() {
        testing::write_fixture_inputs(dir.path());
        manifest = run_pipeline(ws, testing::fixture_config(), dir.path());
    }
};

FixtureRun& fixture_run() {
    static FixtureRun run;
    return run;
}

}  // namespace

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    testing::TempDir dir;
    std::ofstream(dir / "f", std::ios::binary) << "abc";
    CHECK(file_sha256(dir / "f") == sha256_hex("abc"));
    CHECK_THROWS_AS(file_sha256(dir / "missing"), NotFoundError);
}

TEST_CASE("config hash ignores key order and whitespace") {
    const auto a = json::parse(R"({"b": 1, "a": {"y": [1, 2], "x": "s"}})");
    const auto b = json::parse(R"({"a":{"x":"s","y":[1,2]},"b":1})");
    CHECK(canonical_json(a) == R"({"a":{"x":"s","y":[1,2]},"b":1})");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(json::parse(R"({"a":{"x":"s","y":[2,1]},"b":1})")));
}

TEST_CASE("chord graph: shared documents give a single edge") {
    // Docs 0 and 1 sit in both A and B, doc 2 only in C.
    Eigen::MatrixXd dt(3, 3);
    dt << 0.5, 0.5, 0.0,  //
        0.45, 0.5, 0.05,  //
        0.0, 0.0, 1.0;
    const auto g = chord_graph(soft_model(dt), 0.1);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0] == ChordEdge{0, 1, 2});
    CHECK(g.nodes[0].size == 2);
    CHECK(g.nodes[1].size == 2);
    CHECK(g.nodes[2].size == 1);
    CHECK(g.threshold == 0.1);
}

TEST_CASE("chord graph: hard labels never overlap") {
    const auto g = chord_graph(hard_model({0, 1, 2, 1, -1, 0, 2, -1}, 3));
    CHECK(g.edges.empty());
    CHECK(g.nodes.size() == 3);
    CHECK(g.nodes[0].size == 2);
    CHECK(g.nodes[1].size == 2);
    CHECK(g.nodes[2].size == 2);  // outliers belong to no node
}

TEST_CASE("chord graph: threshold 1 leaves no edges on a simplex") {
    std::mt19937 rng(3);
    std::gamma_distribution<double> gamma(0.3, 1.0);
    Eigen::MatrixXd dt(40, 5);
    for (int d = 0; d < 40; ++d) {
        for (int t = 0; t < 5; ++t) dt(d, t) = gamma(rng) + 1e-12;
        dt.row(d) /= dt.row(d).sum();
    }
    CHECK(chord_graph(soft_model(dt), 1.0).edges.empty());
}

TEST_CASE("chord graph matches a brute-force count on random fixtures") {
    std::mt19937 rng(17);
    std::gamma_distribution<double> gamma(0.5, 1.0);
    std::uniform_int_distribution<int> dims(1, 8);
    std::uniform_real_distribution<double> tau_dist(0.0, 0.6);
    for (int trial = 0; trial < 100; ++trial) {
        const int docs = dims(rng) * 5;
        const int k = dims(rng);
        Eigen::MatrixXd dt(docs, k);
        for (int d = 0; d < docs; ++d) {
            for (int t = 0; t < k; ++t) dt(d, t) = gamma(rng) + 1e-12;
            dt.row(d) /= dt.row(d).sum();
        }
        const double tau = tau_dist(rng);
        const auto g = chord_graph(soft_model(dt), tau);
        const auto expected = brute_force_edges(dt, tau);
        REQUIRE(g.edges.size() == expected.size());
        for (const auto& e : g.edges) {
            CHECK(e.source < e.target);
            CHECK(expected.at({e.source, e.target}) == e.shared);
            CHECK(e.shared <= std::min(g.nodes[e.source].size, g.nodes[e.target].size));
        }
    }
}

TEST_CASE("chord graph JSON round trip") {
    const auto g = chord_graph(hard_model({0, 1, 1}, 2), 0.2, 10, "embed_x");
    const json j = g;
    CHECK(j.at("model") == "embed_x");
    CHECK(j.at("threshold") == 0.2);
    CHECK(j.get<ChordGraph>() == g);
    CHECK_THROWS_AS(chord_graph(hard_model({0}, 1), 1.5), ConfigError);
}

TEST_CASE("desirability list ships with the library") {
    const auto& words = default_desirability_words();
    CHECK(words.size() == 118);
    CHECK(std::set<std::string>(words.begin(), words.end()).size() == words.size());
    CHECK(std::find(words.begin(), words.end(), "Trustworthy") != words.end());
}

TEST_CASE("ranking validation") {
    const std::vector<std::string> methods{"LDA", "NMF", "EMBED"};
    const std::set<std::string> words{"Clear", "Useful", "Dated", "Fresh", "Novel", "Boring", "Busy"};
    const json good = {{"dataset", "forum"},
                       {"reviewer", "r1"},
                       {"ordering", {"embed", "lda", "NMF"}},
                       {"words", {{"LDA", {"Clear", "Useful"}}, {"bertopic", {"Fresh"}}}},
                       {"notes", "ok"}};
    RankingRecord r;

    SUBCASE("valid payload is normalised") {
        REQUIRE(validate_ranking(good, methods, words, r).empty());
        CHECK(r.ordering == std::vector<std::string>{"EMBED", "LDA", "NMF"});
        CHECK(r.words.at("EMBED") == std::vector<std::string>{"Fresh"});
        CHECK_FALSE(r.timestamp.empty());
    }
    SUBCASE("six words for one method") {
        json bad = good;
        bad["words"]["LDA"] = {"Clear", "Useful", "Dated", "Fresh", "Novel", "Boring"};
        const auto errors = validate_ranking(bad, methods, words, r);
        REQUIRE(errors.size() == 1);
        CHECK(errors[0].field == "words.LDA");
    }
    SUBCASE("ordering must be a permutation") {
        json bad = good;
        bad["ordering"] = {"LDA", "LDA", "NMF"};
        CHECK(validate_ranking(bad, methods, words, r).at(0).field == "ordering");
        bad["ordering"] = {"LDA", "NMF"};
        CHECK(validate_ranking(bad, methods, words, r).at(0).field == "ordering");
        bad["ordering"] = {"LDA", "NMF", "PCA"};
        CHECK(validate_ranking(bad, methods, words, r).at(0).field == "ordering");
    }
    SUBCASE("words come from the list, once each") {
        json bad = good;
        bad["words"]["NMF"] = {"Shiny", "Clear", "Clear"};
        const auto errors = validate_ranking(bad, methods, words, r);
        CHECK(errors.size() == 2);
        for (const auto& e : errors) CHECK(e.field == "words.NMF");
    }
    SUBCASE("missing fields are all reported") {
        const auto errors = validate_ranking(json{{"ordering", 3}}, methods, words, r);
        std::set<std::string> fields;
        for (const auto& e : errors) fields.insert(e.field);
        CHECK(fields == std::set<std::string>{"dataset", "reviewer", "ordering"});
        CHECK(validate_ranking(json::array(), methods, words, r).at(0).field == "body");
    }
}

TEST_CASE("ranking store appends and filters") {
    testing::TempDir dir;
    RankingStore store(dir / "rankings.jsonl");
    CHECK(store.list().empty());
    RankingRecord a{"forum", "r1", {"LDA", "NMF", "EMBED"}, {{"LDA", {"Clear"}}}, "n", "2026-01-01T00:00:00Z"};
    RankingRecord b = a;
    b.dataset = "board";
    store.append(a);
    store.append(b);
    CHECK(store.list() == std::vector<RankingRecord>{a, b});
    CHECK(store.list("board") == std::vector<RankingRecord>{b});
    std::ofstream(dir / "rankings.jsonl", std::ios::app) << "{\"truncated";
    CHECK(store.list().size() == 2);
}

TEST_CASE("ranking statistics: unanimous reviewers") {
    std::vector<RankingRecord> records(12, RankingRecord{"d", "r", {"EMBED", "LDA", "NMF"}, {}, "", "t"});
    const json s = ranking_statistics(records, {"LDA", "NMF", "EMBED"});
    CHECK(s.at("blocks") == 12);
    CHECK(s.at("friedman").at("statistic").get<double>() == doctest::Approx(24.0).epsilon(1e-12));
    CHECK(s.at("nemenyi").at("pairwise").size() == 3);
    CHECK(ranking_statistics({}, {"LDA", "NMF"}).at("friedman").is_null());
}

TEST_CASE("run config validation") {
    const json base = testing::fixture_config();
    CHECK_NOTHROW(RunConfig::from_json(base));
    const auto c = RunConfig::from_json(base, "/data");
    CHECK(c.datasets[0].threads == fs::path("/data/forum_threads.json"));
    CHECK(c.datasets[1].subreddit == "board");
    CHECK(c.selection.at(Method::Embed).strategy == "median");
    CHECK(c.selection.at(Method::Embed).runs == 3);
    CHECK(c.selection.at(Method::Lda).grid == std::vector<int>{2, 3, 4});

    auto bad = base;
    bad["unknown"] = 1;
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
    bad = base;
    bad["stages"] = {"ingest", "train"};
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
    bad = base;
    bad["selection"]["lda"]["strategy"] = "median";
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
    bad = base;
    bad["datasets"][0]["dumps"] = "x";
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
    bad = base;
    bad["datasets"][1]["name"] = "forum";
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
    bad = base;
    bad["lda"]["workers"] = 0;
    CHECK_THROWS_AS(RunConfig::from_json(bad), ConfigError);
}

TEST_CASE("pipeline: fixture run persists every artifact") {
    auto& f = fixture_run();
    const auto& m = f.manifest;
    REQUIRE_MESSAGE(m.status == "complete", m.error);
    CHECK(m.run_id == "run-" + config_hash(testing::fixture_config()).substr(0, 12));
    CHECK(m.stages.size() == 5);

    for (const std::string ds : {"forum", "board"}) {
        std::size_t models = 0, metrics_files = 0;
        for (const auto& a : m.artifacts) {
            if (a.dataset != ds) continue;
            models += a.kind == "model";
            metrics_files += a.kind == "metrics";
        }
        CHECK(models == 3);
        CHECK(metrics_files == 1);
    }
    CHECK(m.artifacts_of("stats").size() == 1);
    CHECK(f.ws.verify(m.run_id).empty());
    CHECK(fs::exists(f.ws.run_dir(m.run_id) / "forum" / "model_lda_forum.json"));
    CHECK_FALSE(fs::exists(fs::path(f.ws.run_dir(m.run_id).string() + ".staging")));

    // Seeds are recorded per dataset and method.
    CHECK(m.seeds.at("base") == 7);
    CHECK(m.seeds.at("forum").at("lda") == 7);
    CHECK(m.seeds.at("forum").at("embed") == json({7, 8, 9}));

    // The manifest on disk equals the returned one.
    const json on_disk = f.ws.load_manifest(m.run_id);
    CHECK(on_disk == json(m));
    CHECK(config_hash(on_disk.at("config")) == on_disk.at("config_hash"));
}

TEST_CASE("pipeline: models recover the planted themes") {
    auto& f = fixture_run();
    const auto reg = f.ws.registry();
    REQUIRE(reg.count("forum"));
    const auto& entry = reg.at("forum");
    CHECK(entry.models.size() == 3);
    for (const auto& [id, path] : entry.models) {
        const auto model = models::read_model(f.ws.resolve(path));
        CAPTURE(id);
        CHECK_NOTHROW(model.validate());
        CHECK(model.num_topics() == 3);
        // Each theme leads exactly one topic.
        std::set<std::size_t> themes;
        for (const auto& t : model.topics) {
            for (std::size_t th = 0; th < testing::fixture_themes().size(); ++th) {
                const auto& v = testing::fixture_themes()[th];
                if (std::find(v.begin(), v.end(), t.keywords.at(0).word) != v.end()) themes.insert(th);
            }
        }
        CHECK(themes.size() == 3);
    }
    // The dump dataset dropped its orphan comment.
    const auto threads = ingest::read_threads_json(f.ws.resolve(reg.at("board").threads));
    CHECK(threads.size() == 60);
}

TEST_CASE("pipeline: metrics and stats files") {
    auto& f = fixture_run();
    const auto reports = metrics::read_metrics_json(f.ws.resolve(f.ws.registry().at("forum").metrics));
    REQUIRE(reports.size() == 3);
    for (const auto& r : reports) {
        CHECK(r.num_topics == 3);
        CHECK(r.diversity > 0.0);
        CHECK(r.diversity <= 1.0);
        CHECK(r.runtime_seconds > 0.0);
        CHECK(std::isfinite(r.perplexity));
    }
    const json stats = json::parse(read_file(f.ws.resolve(f.manifest.artifacts_of("stats").at(0).path)));
    for (const auto& metric : report_metrics()) CHECK(stats.at("tables").contains(metric));
}

TEST_CASE("pipeline: rerun of the same config is bit-identical") {
    auto& f = fixture_run();
    std::map<std::string, std::string> before;
    for (const auto& a : f.manifest.artifacts)
        if (!a.volatile_content) before[a.path] = a.sha256;
    CHECK(before.size() >= 14);

    const auto again = run_pipeline(f.ws, testing::fixture_config(), f.dir.path());
    REQUIRE(again.status == "complete");
    CHECK(again.run_id == f.manifest.run_id);
    std::map<std::string, std::string> after;
    for (const auto& a : again.artifacts)
        if (!a.volatile_content) after[a.path] = file_sha256(f.ws.resolve(a.path));
    CHECK(after == before);
    f.manifest = again;
}

TEST_CASE("pipeline: missing input fails without partial artifacts") {
    testing::TempDir dir;
    Workspace ws(dir / "ws");
    testing::write_fixture_inputs(dir.path());
    json cfg = testing::fixture_config();
    cfg["datasets"][1]["dumps"] = "no_such_dir";
    const auto m = run_pipeline(ws, cfg, dir.path());
    CHECK(m.status == "failed");
    CHECK(m.failed_stage == "ingest");
    CHECK(m.artifacts.empty());
    CHECK(m.stages.back().status == "failed");
    CHECK(m.error.find("no_such_dir") != std::string::npos);

    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(ws.root() / "runs"))
        if (e.is_regular_file()) files.push_back(e.path());
    REQUIRE(files.size() == 1);
    CHECK(files[0].filename() == "manifest.json");
    CHECK(ws.load_manifest(m.run_id).status == "failed");
    CHECK(ws.registry().empty());
}

TEST_CASE("workspace verify reports drift") {
    auto& f = fixture_run();
    const auto path = f.ws.resolve(f.ws.registry().at("forum").threads);
    const std::string original = read_file(path);
    std::ofstream(path, std::ios::binary | std::ios::app) << " ";
    const auto problems = f.ws.verify(f.manifest.run_id);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("checksum mismatch") != std::string::npos);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << original;
    CHECK(f.ws.verify(f.manifest.run_id).empty());
    CHECK_THROWS_AS(f.ws.load_manifest("run-000000000000"), NotFoundError);
}

TEST_CASE("export report: tables, stats and chord files") {
    auto& f = fixture_run();
    const auto bundle = export_report(f.ws, f.manifest.run_id);
    CHECK(bundle.metric_tables.size() == 5);
    CHECK(bundle.chords.size() == 6);  // three models for each of two datasets
    for (const auto& p : bundle.metric_tables) {
        const std::string csv = read_file(p);
        CHECK(csv.rfind("dataset,LDA,NMF,EMBED\n", 0) == 0);
        const auto table = stats::parse_metric_table_csv(csv);
        CHECK(table.rows == std::vector<std::string>{"forum", "board"});
    }
    CHECK(read_file(bundle.metric_tables[0]).find("forum,3,3,3") != std::string::npos);
    const auto chord = json::parse(read_file(bundle.directory / "chord_lda_forum.json")).get<ChordGraph>();
    CHECK(chord.model == "lda_forum");
    CHECK(chord.nodes.size() == 3);
    CHECK(json::parse(read_file(bundle.stats)).contains("tables"));
}

TEST_CASE("export report: run without the stats stage") {
    testing::TempDir dir;
    Workspace ws(dir / "ws");
    testing::write_fixture_inputs(dir.path());
    json cfg = testing::fixture_config();
    cfg["datasets"].erase(1);
    cfg["methods"] = {"nmf"};
    cfg["stages"] = {"ingest", "preprocess", "train", "metrics"};
    const auto m = run_pipeline(ws, cfg, dir.path());
    REQUIRE(m.status == "complete");
    try {
        export_report(ws, m.run_id);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("stats") != std::string::npos);
    }
}

TEST_CASE("export report: unknown or empty run id") {
    testing::TempDir dir;
    Workspace ws(dir / "ws");
    CHECK_THROWS_AS(export_report(ws, ""), NotFoundError);
    CHECK_THROWS_AS(export_report(ws, "run-missing"), NotFoundError);
    CHECK_THROWS_AS(export_report(ws, "../etc"), NotFoundError);
}
