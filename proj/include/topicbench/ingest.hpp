#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace topicbench::ingest {

struct SubmissionRecord {
    std::string id;
    std::string title;
    std::string selftext;
    std::int64_t created_utc = 0;
    std::string subreddit;
};

struct CommentRecord {
    std::string id;
    std::string link_id;  // "t3_<submission id>"
    std::string body;
    std::int64_t created_utc = 0;
};

struct Thread {
    std::string id;
    std::string text;
    std::size_t comment_count = 0;

    friend bool operator==(const Thread&, const Thread&) = default;
};

void to_json(nlohmann::json& j, const Thread& t);
void from_json(const nlohmann::json& j, Thread& t);

/// Streams one JSON object per line out of a zstd-compressed (detected by
/// frame magic) or plain NDJSON file. Malformed lines are skipped and
/// counted; a missing file, a corrupt frame or a truncated stream throws
/// IngestError.
class DumpReader {
public:
    explicit DumpReader(const std::filesystem::path& path);
    ~DumpReader();
    DumpReader(const DumpReader&) = delete;
    DumpReader& operator=(const DumpReader&) = delete;
    DumpReader(DumpReader&&) noexcept;
    DumpReader& operator=(DumpReader&&) noexcept;

    /// Next well-formed record, or nullopt at end of input.
    std::optional<nlohmann::json> next();

    std::size_t records() const noexcept { return records_; }
    std::size_t malformed_lines() const noexcept { return malformed_; }
    bool compressed() const noexcept;

private:
    bool next_line(std::string& line);
    bool refill();

    struct Source;
    std::unique_ptr<Source> source_;
    std::string pending_;
    std::size_t pending_pos_ = 0;
    std::size_t records_ = 0;
    std::size_t malformed_ = 0;
};

struct DumpContents {
    std::vector<nlohmann::json> records;
    std::size_t malformed_lines = 0;
};

DumpContents decompress_dump(const std::filesystem::path& path);

/// zstd-compress `lines` as NDJSON into `path`.
void write_zstd_ndjson(const std::filesystem::path& path, const std::vector<std::string>& lines,
                       int level = 3);
std::string zstd_compress(std::string_view data, int level = 3);
std::string zstd_decompress(std::string_view data);

inline constexpr std::string_view kUnknownMonth = "unknown";

struct MonthPartition {
    std::map<std::string, std::vector<nlohmann::json>> buckets;
    std::size_t warnings = 0;
};

/// "YYYY-MM" of a UTC epoch timestamp.
std::string utc_month(std::int64_t epoch_seconds);

/// Buckets records by the UTC month of their created_utc field (integer,
/// float or numeric string). Records without a usable timestamp go to the
/// "unknown" bucket and are counted as warnings.
MonthPartition partition_by_month(std::vector<nlohmann::json> records);

std::optional<SubmissionRecord> parse_submission(const nlohmann::json& j);
std::optional<CommentRecord> parse_comment(const nlohmann::json& j);

struct MergeResult {
    std::vector<Thread> threads;
    std::size_t orphan_count = 0;
};

/// One thread per submission (input order). Comments are attached in
/// ascending (created_utc, id) order; comments whose link_id names no
/// submission are dropped and counted.
MergeResult merge_threads(const std::vector<SubmissionRecord>& submissions,
                          const std::vector<CommentRecord>& comments);

struct LoadReport {
    std::size_t submissions = 0;
    std::size_t comments = 0;
    std::size_t invalid_records = 0;
    std::size_t malformed_lines = 0;
    std::size_t orphan_comments = 0;
};

/// Reads an RS_ (submissions) and RC_ (comments) dump, plain or .zst, and
/// merges them into threads.
MergeResult load_threads(const std::filesystem::path& submissions_path,
                         const std::filesystem::path& comments_path, LoadReport* report = nullptr);

/// Locates RS_<name>.json[.zst] and RC_<name>.json[.zst] inside `dir`.
std::pair<std::filesystem::path, std::filesystem::path> find_dump_pair(
    const std::filesystem::path& dir, const std::string& name);

void write_threads_json(const std::filesystem::path& path, const std::vector<Thread>& threads);
std::vector<Thread> read_threads_json(const std::filesystem::path& path);

}  // namespace topicbench::ingest
