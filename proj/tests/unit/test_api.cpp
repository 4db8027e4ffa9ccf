#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "fixture_corpus.hpp"
#include "temp_dir.hpp"
#include "topicbench/api.hpp"

// After the Eigen headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

using namespace topicbench;
using namespace topicbench::api;
namespace fs = std::filesystem;

namespace {

struct ApiFixture {
    testing::TempDir dir;
    workbench::Workspace ws{dir / "ws"};
    std::unique_ptr<ApiHandler> handler;

    ApiFixture() {
        testing::write_fixture_inputs(dir.path());
        const auto m = workbench::run_pipeline(ws, testing::fixture_config(), dir.path());
        REQUIRE(m.status == "complete");
        handler = std::make_unique<ApiHandler>(ws);
    }

    Response get(const std::string& path, std::map<std::string, std::string> query = {}) {
        return handler->handle({"GET", path, std::move(query), ""});
    }
    Response post(const std::string& path, const std::string& body) {
        return handler->handle({"POST", path, {}, body});
    }
};

ApiFixture& fixture() {
    static ApiFixture f;
    return f;
}

json valid_ranking() {
    return {{"dataset", "forum"},
            {"reviewer", "reviewer-1"},
            {"ordering", {"EMBED", "LDA", "NMF"}},
            {"words", {{"LDA", {"Clear", "Useful"}}, {"EMBED", {"Fresh", "Relevant", "Valuable"}}}},
            {"notes", "embedding topics read best"},
            {"timestamp", "2026-01-01T00:00:00Z"}};
}

// Type skeleton of a payload: scalars become their JSON type name, arrays
// the skeleton of their elements (which must all agree).
json shape(const json& v) {
    switch (v.type()) {
        case json::value_t::null: return "null";
        case json::value_t::boolean: return "boolean";
        case json::value_t::number_integer:
        case json::value_t::number_unsigned:
        case json::value_t::number_float: return "number";
        case json::value_t::string: return "string";
        case json::value_t::array: {
            if (v.empty()) return json::array();
            const json first = shape(v[0]);
            for (const auto& e : v) REQUIRE_MESSAGE(shape(e) == first, "heterogeneous array: " << v.dump());
            return json::array({first});
        }
        case json::value_t::object: {
            json out = json::object();
            for (const auto& [k, e] : v.items()) out[k] = shape(e);
            return out;
        }
        default: return "unknown";
    }
}

std::string snapshot_files(const fs::path& root) {
    std::string out;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) out += p.string() + " " + workbench::file_sha256(p) + "\n";
    return out;
}

}  // namespace

TEST_CASE("GET /datasets lists registered datasets") {
    const auto r = fixture().get("/datasets");
    REQUIRE(r.status == 200);
    const auto& ds = r.body.at("datasets");
    REQUIRE(ds.size() == 2);
    CHECK(ds[0].at("name") == "board");
    CHECK(ds[1].at("name") == "forum");
    CHECK(ds[1].at("models") == json({"embed_forum", "lda_forum", "nmf_forum"}));
}

TEST_CASE("GET /datasets/{d}/models returns one entry per method") {
    const auto r = fixture().get("/datasets/forum/models");
    REQUIRE(r.status == 200);
    const auto& models = r.body.at("models");
    REQUIRE(models.size() == 3);
    std::set<std::string> methods;
    for (const auto& m : models) {
        methods.insert(m.at("method").get<std::string>());
        CHECK(m.at("num_documents") == 60);
    }
    CHECK(methods == std::set<std::string>{"LDA", "NMF", "EMBED"});
    CHECK(fixture().get("/datasets/nope/models").status == 404);
}

TEST_CASE("GET /models/{m}/topics") {
    const auto r = fixture().get("/models/lda_forum/topics");
    REQUIRE(r.status == 200);
    CHECK(r.body.at("method") == "LDA");
    const auto& topics = r.body.at("topics");
    REQUIRE(topics.size() == 3);
    for (const auto& t : topics) {
        CHECK(t.at("keywords").size() == 10);
        const auto& kw = t.at("keywords");
        for (std::size_t i = 1; i < kw.size(); ++i) CHECK(kw[i - 1].at("weight") >= kw[i].at("weight"));
    }
    const auto missing = fixture().get("/models/lda_nowhere/topics");
    CHECK(missing.status == 404);
    CHECK(missing.body.at("error") == "not_found");
}

TEST_CASE("GET /models/{m}/chord honours the threshold") {
    const auto def = fixture().get("/models/lda_forum/chord");
    REQUIRE(def.status == 200);
    CHECK(def.body.at("threshold") == 0.1);
    CHECK(def.body.at("model") == "lda_forum");
    CHECK(def.body.at("nodes").size() == 3);

    const auto all = fixture().get("/models/lda_forum/chord", {{"threshold", "0"}});
    REQUIRE(all.status == 200);
    CHECK(all.body.at("edges").size() == 3);  // every doc belongs to every topic
    for (const auto& e : all.body.at("edges")) CHECK(e.at("shared") == 60);

    CHECK(fixture().get("/models/lda_forum/chord", {{"threshold", "1"}}).body.at("edges").empty());
    CHECK(fixture().get("/models/embed_forum/chord").body.at("edges").empty());
    CHECK(fixture().get("/models/lda_forum/chord", {{"threshold", "abc"}}).status == 400);
    CHECK(fixture().get("/models/lda_forum/chord", {{"threshold", "1.5"}}).status == 400);
}

TEST_CASE("GET /models/{m}/topics/{t}/documents pages by membership") {
    auto& f = fixture();
    const auto r = f.get("/models/nmf_forum/topics/0/documents", {{"limit", "5"}});
    REQUIRE(r.status == 200);
    const auto& docs = r.body.at("documents");
    REQUIRE(docs.size() == 5);
    CHECK(r.body.at("limit") == 5);
    CHECK(r.body.at("offset") == 0);
    for (std::size_t i = 1; i < docs.size(); ++i) CHECK(docs[i - 1].at("membership") >= docs[i].at("membership"));
    CHECK_FALSE(docs[0].at("excerpt").get<std::string>().empty());

    const auto total = r.body.at("total").get<std::size_t>();
    const auto all = f.get("/models/nmf_forum/topics/0/documents", {{"limit", "500"}});
    CHECK(all.body.at("documents").size() == total);
    const auto page2 = f.get("/models/nmf_forum/topics/0/documents", {{"limit", "5"}, {"offset", "5"}});
    CHECK(page2.body.at("documents")[0] == all.body.at("documents")[5]);
    CHECK(f.get("/models/nmf_forum/topics/0/documents", {{"offset", "100000"}}).body.at("documents").empty());

    CHECK(f.get("/models/nmf_forum/topics/0/documents").body.at("limit") == 20);
    CHECK(f.get("/models/nmf_forum/topics/0/documents", {{"limit", "0"}}).status == 400);
    CHECK(f.get("/models/nmf_forum/topics/0/documents", {{"limit", "x"}}).status == 400);
    CHECK(f.get("/models/nmf_forum/topics/0/documents", {{"offset", "-1"}}).status == 400);
    CHECK(f.get("/models/nmf_forum/topics/9/documents").status == 404);
    CHECK(f.get("/models/nmf_forum/topics/one/documents").status == 404);

    // Hard-label documents all have membership in their own topic.
    const auto emb = f.get("/models/embed_forum/topics/0/documents", {{"limit", "500"}});
    REQUIRE(emb.status == 200);
    CHECK(emb.body.at("total") == 20);
}

TEST_CASE("unknown routes and methods") {
    auto& f = fixture();
    CHECK(f.get("/nothing").status == 404);
    CHECK(f.handler->handle({"DELETE", "/datasets", {}, ""}).status == 405);
    CHECK(f.handler->handle({"PUT", "/rankings", {}, ""}).status == 405);
    CHECK(f.get("/datasets/").status == 200);
}

TEST_CASE("POST /rankings then GET returns the identical record") {
    auto& f = fixture();
    const auto before = f.get("/rankings", {{"dataset", "forum"}}).body.at("rankings").size();
    const auto created = f.post("/rankings", valid_ranking().dump());
    REQUIRE(created.status == 201);
    CHECK(created.body == valid_ranking());
    const auto listed = f.get("/rankings", {{"dataset", "forum"}}).body.at("rankings");
    REQUIRE(listed.size() == before + 1);
    CHECK(listed.back() == valid_ranking());
    CHECK(f.get("/rankings", {{"dataset", "board"}}).body.at("rankings").empty());
}

TEST_CASE("POST /rankings rejects invalid payloads with field errors") {
    auto& f = fixture();
    const auto count = f.get("/rankings").body.at("rankings").size();

    json six = valid_ranking();
    six["words"]["LDA"] = {"Clear", "Useful", "Fresh", "Relevant", "Valuable", "Stable"};
    const auto r = f.post("/rankings", six.dump());
    CHECK(r.status == 422);
    CHECK(r.body.at("error") == "validation");
    REQUIRE(r.body.at("fields").size() == 1);
    CHECK(r.body.at("fields")[0].at("field") == "words.LDA");

    json unknown = valid_ranking();
    unknown["dataset"] = "elsewhere";
    const auto u = f.post("/rankings", unknown.dump());
    CHECK(u.status == 422);
    CHECK(u.body.at("fields")[0].at("field") == "dataset");

    json partial = valid_ranking();
    partial["ordering"] = {"LDA", "NMF"};
    CHECK(f.post("/rankings", partial.dump()).status == 422);

    CHECK(f.post("/rankings", "{not json").status == 400);
    CHECK(f.get("/rankings").body.at("rankings").size() == count);
}

TEST_CASE("GET /desirability-words") {
    const auto r = fixture().get("/desirability-words");
    REQUIRE(r.status == 200);
    CHECK(r.body.at("words").size() == 118);
    CHECK(r.body.at("max_per_method") == 5);
}

TEST_CASE("read endpoints are side-effect free and repeatable") {
    auto& f = fixture();
    const std::vector<std::pair<std::string, std::map<std::string, std::string>>> reads{
        {"/datasets", {}},
        {"/datasets/forum/models", {}},
        {"/models/lda_forum/topics", {}},
        {"/models/nmf_board/chord", {{"threshold", "0.2"}}},
        {"/models/embed_board/topics/1/documents", {{"limit", "3"}}},
        {"/rankings", {}},
        {"/desirability-words", {}},
    };
    const std::string files_before = snapshot_files(f.ws.root());
    for (const auto& [path, query] : reads) {
        CAPTURE(path);
        const auto a = f.get(path, query);
        const auto b = f.get(path, query);
        CHECK(a.status == 200);
        CHECK(a.text() == b.text());
        // A fresh handler (cold caches) serves the same bytes.
        CHECK(ApiHandler(f.ws).handle({"GET", path, query, ""}).text() == a.text());
    }
    CHECK(snapshot_files(f.ws.root()) == files_before);
}

TEST_CASE("payload schemas match the frozen contract") {
    auto& f = fixture();
    json shapes = json::object();
    shapes["GET /datasets"] = shape(f.get("/datasets").body);
    shapes["GET /datasets/{dataset}/models"] = shape(f.get("/datasets/forum/models").body);
    shapes["GET /models/{model}/topics"] = shape(f.get("/models/lda_forum/topics").body);
    shapes["GET /models/{model}/chord"] = shape(f.get("/models/lda_forum/chord", {{"threshold", "0"}}).body);
    shapes["GET /models/{model}/topics/{topic}/documents"] = shape(f.get("/models/lda_forum/topics/0/documents").body);
    shapes["POST /rankings 201"] = shape(f.post("/rankings", valid_ranking().dump()).body);
    shapes["POST /rankings 422"] = shape(f.post("/rankings", json{{"dataset", "forum"}}.dump()).body);
    shapes["GET /rankings"] = shape(f.get("/rankings").body);
    shapes["GET /desirability-words"] = shape(f.get("/desirability-words").body);
    shapes["error 404"] = shape(f.get("/nothing").body);

    const fs::path golden = fs::path(TOPICBENCH_TEST_DATA) / "api_contract.json";
    if (std::getenv("TOPICBENCH_UPDATE_GOLDEN")) {
        std::ofstream(golden) << shapes.dump(2) << "\n";
        MESSAGE("golden contract rewritten");
    }
    std::ifstream in(golden);
    REQUIRE_MESSAGE(in, "missing " << golden);
    const json expected = json::parse(in);
    for (const auto& [route, s] : expected.items()) {
        CAPTURE(route);
        REQUIRE(shapes.contains(route));
        CHECK(shapes[route] == s);
    }
    CHECK(shapes.size() == expected.size());
    // Every documented route is covered by the contract.
    for (const auto& [method, route] : ApiHandler::routes()) {
        const std::string key = method + " " + route;
        CHECK_MESSAGE((expected.contains(key) || expected.contains(key + " 201")), key);
    }
}

TEST_CASE("HTTP server serves the handler's payloads") {
    auto& f = fixture();
    Server server(f.ws, {"127.0.0.1", 0, ""});
    const int port = server.start();
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);

    auto res = client.Get("/datasets/forum/models");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/json");
    CHECK(res->body == f.get("/datasets/forum/models").text());

    res = client.Get("/models/lda_forum/topics/0/documents?limit=2");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("documents").size() == 2);

    json body = valid_ranking();
    body["reviewer"] = "http-reviewer";
    res = client.Post("/rankings", body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 201);
    res = client.Post("/rankings", "[]", "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    res = client.Get("/missing");
    REQUIRE(res);
    CHECK(res->status == 404);
    server.stop();
}

TEST_CASE("concurrent ranking writes are serialised") {
    auto& f = fixture();
    const auto before = f.get("/rankings").body.at("rankings").size();
    std::vector<std::thread> writers;
    for (int t = 0; t < 4; ++t) {
        writers.emplace_back([&f, t] {
            for (int i = 0; i < 25; ++i) {
                json body = valid_ranking();
                body["reviewer"] = "w" + std::to_string(t) + "-" + std::to_string(i);
                CHECK(f.post("/rankings", body.dump()).status == 201);
            }
        });
    }
    for (auto& w : writers) w.join();
    const auto after = f.get("/rankings").body.at("rankings");
    CHECK(after.size() == before + 100);
    std::set<std::string> reviewers;
    for (const auto& r : after) reviewers.insert(r.at("reviewer").get<std::string>());
    for (int t = 0; t < 4; ++t)
        for (int i = 0; i < 25; ++i) CHECK(reviewers.count("w" + std::to_string(t) + "-" + std::to_string(i)));
}
