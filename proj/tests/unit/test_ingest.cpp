#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "temp_dir.hpp"
#include "topicbench/error.hpp"
#include "topicbench/ingest.hpp"

using namespace topicbench;
using namespace topicbench::ingest;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Days-from-civil inverse (H. Hinnant's algorithm), written out longhand as
// an independent epoch -> calendar oracle.
std::string month_oracle(long long epoch) {
    long long z = epoch / 86400;
    if (epoch % 86400 < 0) --z;
    z += 719468;
    const long long era = (z >= 0 ? z : z - 146096) / 146097;
    const long long doe = z - era * 146097;
    const long long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    long long y = yoe + era * 400;
    const long long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const long long mp = (5 * doy + 2) / 153;
    const long long m = mp < 10 ? mp + 3 : mp - 9;
    if (m <= 2) ++y;
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04lld-%02lld", y, m);
    return buf;
}

SubmissionRecord submission(std::string id, std::string title, std::string body, std::int64_t t = 0) {
    return SubmissionRecord{std::move(id), std::move(title), std::move(body), t, "test"};
}

CommentRecord comment(std::string id, std::string link, std::string body, std::int64_t t) {
    return CommentRecord{std::move(id), std::move(link), std::move(body), t};
}

}  // namespace

TEST_SUITE("decompress_dump") {

TEST_CASE("empty inputs yield nothing") {
    testing::TempDir dir;
    write_text(dir / "empty.json", "");
    auto plain = decompress_dump(dir / "empty.json");
    CHECK(plain.records.empty());
    CHECK(plain.malformed_lines == 0);

    write_text(dir / "empty.zst", "");
    auto zst = decompress_dump(dir / "empty.zst");
    CHECK(zst.records.empty());
    CHECK(zst.malformed_lines == 0);

    write_zstd_ndjson(dir / "empty_frame.zst", {});
    CHECK(decompress_dump(dir / "empty_frame.zst").records.empty());
}

TEST_CASE("three valid lines") {
    testing::TempDir dir;
    write_zstd_ndjson(dir / "RS_x.zst", {R"({"id":"a","created_utc":1})", R"({"id":"b","created_utc":2})",
                                         R"({"id":"c","created_utc":3})"});
    DumpReader reader(dir / "RS_x.zst");
    CHECK(reader.compressed());
    int n = 0;
    while (reader.next()) ++n;
    CHECK(n == 3);
    CHECK(reader.malformed_lines() == 0);
}

TEST_CASE("truncated line is skipped and counted") {
    testing::TempDir dir;
    write_zstd_ndjson(dir / "RC_x.zst",
                      {R"({"id":"a","created_utc":1})", R"({"id":"b","crea)", R"({"id":"c","created_utc":3})"});
    const auto out = decompress_dump(dir / "RC_x.zst");
    CHECK(out.records.size() == 2);
    CHECK(out.malformed_lines == 1);
}

TEST_CASE("non-object lines count as malformed; blank lines are ignored") {
    testing::TempDir dir;
    write_text(dir / "mixed.json", "{\"id\":\"a\"}\n\n[1,2]\n42\n{\"id\":\"b\"}");
    const auto out = decompress_dump(dir / "mixed.json");
    CHECK(out.records.size() == 2);
    CHECK(out.malformed_lines == 2);
}

TEST_CASE("missing, corrupt and truncated archives are fatal") {
    testing::TempDir dir;
    CHECK_THROWS_AS(decompress_dump(dir / "nope.zst"), IngestError);

    write_text(dir / "garbage.zst", "this is not zstd at all");
    CHECK_THROWS_AS(decompress_dump(dir / "garbage.zst"), IngestError);

    std::vector<std::string> lines;
    for (int i = 0; i < 2000; ++i) lines.push_back(R"({"id":"r)" + std::to_string(i) + R"(","created_utc":5})");
    write_zstd_ndjson(dir / "full.zst", lines);
    std::ifstream in(dir / "full.zst", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    write_text(dir / "cut.zst", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(decompress_dump(dir / "cut.zst"), IngestError);

    // Corrupt the middle of an otherwise valid frame.
    std::string flipped = bytes;
    for (std::size_t i = 20; i < 60 && i < flipped.size(); ++i) flipped[i] = static_cast<char>(~flipped[i]);
    write_text(dir / "flipped.zst", flipped);
    CHECK_THROWS_AS(decompress_dump(dir / "flipped.zst"), IngestError);
}

TEST_CASE("compressed lines round-trip byte for byte") {
    testing::TempDir dir;
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> len(0, 300);
    std::uniform_int_distribution<int> ch(32, 126);
    std::vector<std::string> lines;
    for (int i = 0; i < 500; ++i) {
        std::string body;
        const int n = len(rng);
        for (int k = 0; k < n; ++k) body.push_back(static_cast<char>(ch(rng)));
        lines.push_back(nlohmann::json{{"id", std::to_string(i)}, {"body", body}, {"created_utc", i}}.dump());
    }
    write_zstd_ndjson(dir / "rt.zst", lines);
    const auto out = decompress_dump(dir / "rt.zst");
    REQUIRE(out.records.size() == lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        CHECK(out.records[i].dump() == lines[i]);
    }
    CHECK(zstd_decompress(zstd_compress("hello\nworld\n")) == "hello\nworld\n");
}

}  // TEST_SUITE

TEST_SUITE("partition_by_month") {

TEST_CASE("known timestamp") {
    CHECK(utc_month(1672531200) == "2023-01");
    CHECK(utc_month(1672531199) == "2022-12");
    CHECK(utc_month(0) == "1970-01");
}

TEST_CASE("utc_month agrees with the civil-calendar oracle") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<long long> dist(0, 4102444800LL);
    for (int i = 0; i < 2000; ++i) {
        const auto t = dist(rng);
        CHECK(utc_month(t) == month_oracle(t));
    }
}

TEST_CASE("buckets") {
    CHECK(partition_by_month({}).buckets.empty());

    const auto two = partition_by_month({{{"created_utc", 1672531200}}, {{"created_utc", 1672617600}}});
    REQUIRE(two.buckets.size() == 1);
    CHECK(two.buckets.at("2023-01").size() == 2);

    const auto mixed = partition_by_month({{{"created_utc", "1672531200"}},
                                           {{"created_utc", 1675209600.5}},
                                           {{"id", "x"}},
                                           {{"created_utc", "soon"}}});
    CHECK(mixed.buckets.at("2023-01").size() == 1);
    CHECK(mixed.buckets.at("2023-02").size() == 1);
    CHECK(mixed.buckets.at("unknown").size() == 2);
    CHECK(mixed.warnings == 2);
}

TEST_CASE("partition sizes sum to the input size") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<long long> dist(1'500'000'000LL, 1'700'000'000LL);
    std::vector<nlohmann::json> recs;
    for (int i = 0; i < 1000; ++i) {
        if (i % 97 == 0) {
            recs.push_back({{"id", i}});
        } else {
            recs.push_back({{"created_utc", dist(rng)}});
        }
    }
    const auto part = partition_by_month(recs);
    std::size_t total = 0;
    for (const auto& [month, items] : part.buckets) {
        total += items.size();
        for (const auto& r : items) {
            if (month != "unknown") CHECK(utc_month(r["created_utc"].get<long long>()) == month);
        }
    }
    CHECK(total == recs.size());
}

}  // TEST_SUITE

TEST_SUITE("merge_threads") {

TEST_CASE("submission without comments") {
    const auto r = merge_threads({submission("s1", "T", "S")}, {});
    REQUIRE(r.threads.size() == 1);
    CHECK(r.threads[0].text == "T S");
    CHECK(r.threads[0].comment_count == 0);
    CHECK(r.orphan_count == 0);
}

TEST_CASE("comments attach in chronological order") {
    const auto r = merge_threads({submission("s1", "T", "S")},
                                 {comment("c1", "t3_s1", "A", 2), comment("c2", "t3_s1", "B", 1)});
    CHECK(r.threads[0].text == "T S B A");
    CHECK(r.threads[0].comment_count == 2);
}

TEST_CASE("equal timestamps break ties by comment id") {
    const auto r = merge_threads({submission("s1", "T", "")},
                                 {comment("zz", "t3_s1", "second", 5), comment("aa", "t3_s1", "first", 5)});
    CHECK(r.threads[0].text == "T first second");
}

TEST_CASE("orphans are counted, not attached") {
    const auto r = merge_threads({submission("s1", "T", "S")}, {comment("c1", "t3_missing", "X", 1)});
    CHECK(r.orphan_count == 1);
    CHECK(r.threads[0].text == "T S");
    CHECK(r.threads[0].comment_count == 0);
}

TEST_CASE("counts are conserved on random inputs") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<SubmissionRecord> subs;
        const int ns = 1 + static_cast<int>(rng() % 20);
        for (int i = 0; i < ns; ++i) subs.push_back(submission("s" + std::to_string(i), "title" + std::to_string(i), ""));
        std::vector<CommentRecord> comments;
        const int nc = static_cast<int>(rng() % 60);
        for (int i = 0; i < nc; ++i) {
            const int target = static_cast<int>(rng() % (ns + 5));
            comments.push_back(comment("c" + std::to_string(i), "t3_s" + std::to_string(target), "b",
                                       static_cast<std::int64_t>(rng() % 100)));
        }
        const auto r = merge_threads(subs, comments);
        CHECK(r.threads.size() == subs.size());
        std::size_t attached = 0;
        for (std::size_t i = 0; i < r.threads.size(); ++i) {
            attached += r.threads[i].comment_count;
            CHECK(r.threads[i].text.find(subs[i].title) != std::string::npos);
        }
        CHECK(attached + r.orphan_count == comments.size());
    }
}

TEST_CASE("record parsing") {
    CHECK(parse_submission({{"id", "a"}, {"title", "t"}, {"created_utc", 5}}).has_value());
    CHECK_FALSE(parse_submission({{"title", "t"}, {"created_utc", 5}}).has_value());
    CHECK_FALSE(parse_submission({{"id", "a"}, {"created_utc", -5}}).has_value());
    CHECK(parse_comment({{"id", "c"}, {"link_id", "t3_a"}, {"body", "x"}, {"created_utc", 1}}).has_value());
    CHECK_FALSE(parse_comment({{"id", "c"}, {"link_id", "t1_a"}, {"created_utc", 1}}).has_value());
}

TEST_CASE("load_threads from RS/RC dumps and threads.json round trip") {
    testing::TempDir dir;
    write_zstd_ndjson(dir / "RS_demo.json.zst",
                      {R"({"id":"s1","title":"Hello","selftext":"World","created_utc":100})",
                       R"({"id":"s2","title":"Second","selftext":"","created_utc":200})", "{broken"});
    write_text(dir / "RC_demo.json",
               R"({"id":"c1","link_id":"t3_s1","body":"reply","created_utc":150})" "\n"
               R"({"id":"c2","link_id":"t3_zz","body":"lost","created_utc":160})" "\n");
    const auto [rs, rc] = find_dump_pair(dir.path(), "demo");
    LoadReport report;
    const auto merged = load_threads(rs, rc, &report);
    CHECK(merged.threads.size() == 2);
    CHECK(merged.threads[0].text == "Hello World reply");
    CHECK(report.malformed_lines == 1);
    CHECK(report.orphan_comments == 1);

    write_threads_json(dir / "threads.json", merged.threads);
    CHECK(read_threads_json(dir / "threads.json") == merged.threads);
    CHECK_THROWS_AS(find_dump_pair(dir.path(), "other"), IngestError);
}

}  // TEST_SUITE
