#include "topicbench/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include <spdlog/spdlog.h>
#include <zstd.h>

#include "topicbench/error.hpp"

namespace topicbench::ingest {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// DumpReader

struct DumpReader::Source {
    std::ifstream file;
    fs::path path;
    bool compressed = false;
    bool eof = false;
    ZSTD_DStream* stream = nullptr;
    std::vector<char> in_buf;
    ZSTD_inBuffer in{nullptr, 0, 0};
    std::size_t last_ret = 0;  // 0 once a frame has been fully decoded
    bool saw_input = false;

    ~Source() {
        if (stream != nullptr) {
            ZSTD_freeDStream(stream);
        }
    }
};

DumpReader::DumpReader(const fs::path& path) : source_(std::make_unique<Source>()) {
    source_->path = path;
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw IngestError("dump not found: " + path.string());
    }
    source_->file.open(path, std::ios::binary);
    if (!source_->file) {
        throw IngestError("cannot open dump: " + path.string());
    }
    std::array<unsigned char, 4> magic{};
    source_->file.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = source_->file.gcount();
    source_->file.clear();
    source_->file.seekg(0);
    const bool zstd_magic = got == 4 && magic[0] == 0x28 && magic[1] == 0xB5 && magic[2] == 0x2F &&
                            magic[3] == 0xFD;
    if (path.extension() == ".zst" && got > 0 && !zstd_magic) {
        throw IngestError("not a zstd frame: " + path.string());
    }
    source_->compressed = zstd_magic;
    if (source_->compressed) {
        source_->stream = ZSTD_createDStream();
        if (source_->stream == nullptr) {
            throw IngestError("cannot allocate zstd stream");
        }
        // Pushshift dumps are written with --long=31.
        ZSTD_DCtx_setParameter(source_->stream, ZSTD_d_windowLogMax, 31);
        source_->in_buf.resize(ZSTD_DStreamInSize());
    }
}

DumpReader::~DumpReader() = default;
DumpReader::DumpReader(DumpReader&&) noexcept = default;
DumpReader& DumpReader::operator=(DumpReader&&) noexcept = default;

bool DumpReader::compressed() const noexcept {
    return source_->compressed;
}

bool DumpReader::refill() {
    auto& src = *source_;
    if (src.eof) {
        return false;
    }
    if (!src.compressed) {
        std::array<char, 1 << 16> buf{};
        src.file.read(buf.data(), buf.size());
        const auto n = src.file.gcount();
        if (n <= 0) {
            src.eof = true;
            return false;
        }
        pending_.append(buf.data(), static_cast<std::size_t>(n));
        return true;
    }

    std::vector<char> out(ZSTD_DStreamOutSize());
    while (true) {
        if (src.in.pos == src.in.size) {
            src.file.read(src.in_buf.data(), static_cast<std::streamsize>(src.in_buf.size()));
            const auto n = src.file.gcount();
            if (n <= 0) {
                src.eof = true;
                if (src.saw_input && src.last_ret != 0) {
                    throw IngestError("truncated zstd stream: " + src.path.string());
                }
                return false;
            }
            src.saw_input = true;
            src.in = ZSTD_inBuffer{src.in_buf.data(), static_cast<std::size_t>(n), 0};
        }
        ZSTD_outBuffer ob{out.data(), out.size(), 0};
        const std::size_t ret = ZSTD_decompressStream(src.stream, &ob, &src.in);
        if (ZSTD_isError(ret)) {
            throw IngestError("corrupt zstd stream " + src.path.string() + ": " +
                              ZSTD_getErrorName(ret));
        }
        src.last_ret = ret;
        if (ob.pos > 0) {
            pending_.append(out.data(), ob.pos);
            return true;
        }
    }
}

bool DumpReader::next_line(std::string& line) {
    while (true) {
        const auto nl = pending_.find('\n', pending_pos_);
        if (nl != std::string::npos) {
            line.assign(pending_, pending_pos_, nl - pending_pos_);
            pending_pos_ = nl + 1;
            return true;
        }
        // Compact before reading more.
        pending_.erase(0, pending_pos_);
        pending_pos_ = 0;
        if (!refill()) {
            if (pending_.empty()) {
                return false;
            }
            line.swap(pending_);
            pending_.clear();
            return true;
        }
    }
}

std::optional<nlohmann::json> DumpReader::next() {
    std::string line;
    while (next_line(line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        auto parsed = nlohmann::json::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
            ++malformed_;
            continue;
        }
        ++records_;
        return parsed;
    }
    return std::nullopt;
}

DumpContents decompress_dump(const fs::path& path) {
    DumpReader reader(path);
    DumpContents out;
    while (auto rec = reader.next()) {
        out.records.push_back(std::move(*rec));
    }
    out.malformed_lines = reader.malformed_lines();
    if (out.malformed_lines > 0) {
        spdlog::warn("{}: skipped {} malformed line(s)", path.string(), out.malformed_lines);
    }
    return out;
}

std::string zstd_compress(std::string_view data, int level) {
    std::string out(ZSTD_compressBound(data.size()), '\0');
    const std::size_t n = ZSTD_compress(out.data(), out.size(), data.data(), data.size(), level);
    if (ZSTD_isError(n)) {
        throw IngestError(std::string("zstd compression failed: ") + ZSTD_getErrorName(n));
    }
    out.resize(n);
    return out;
}

std::string zstd_decompress(std::string_view data) {
    ZSTD_DStream* stream = ZSTD_createDStream();
    std::unique_ptr<ZSTD_DStream, decltype(&ZSTD_freeDStream)> guard(stream, ZSTD_freeDStream);
    std::string out;
    std::vector<char> buf(ZSTD_DStreamOutSize());
    ZSTD_inBuffer in{data.data(), data.size(), 0};
    std::size_t ret = 1;
    while (in.pos < in.size) {
        ZSTD_outBuffer ob{buf.data(), buf.size(), 0};
        ret = ZSTD_decompressStream(stream, &ob, &in);
        if (ZSTD_isError(ret)) {
            throw IngestError(std::string("corrupt zstd data: ") + ZSTD_getErrorName(ret));
        }
        out.append(buf.data(), ob.pos);
    }
    if (!data.empty() && ret != 0) {
        throw IngestError("truncated zstd data");
    }
    return out;
}

void write_zstd_ndjson(const fs::path& path, const std::vector<std::string>& lines, int level) {
    std::string raw;
    for (const auto& l : lines) {
        raw += l;
        raw.push_back('\n');
    }
    const auto packed = zstd_compress(raw, level);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IngestError("cannot write " + path.string());
    }
    out.write(packed.data(), static_cast<std::streamsize>(packed.size()));
}

// ---------------------------------------------------------------------------
// Month partitioning

namespace {

std::optional<std::int64_t> epoch_of(const nlohmann::json& rec) {
    const auto it = rec.find("created_utc");
    if (it == rec.end()) {
        return std::nullopt;
    }
    std::int64_t value = 0;
    if (it->is_number_integer()) {
        value = it->get<std::int64_t>();
    } else if (it->is_number_float()) {
        const double d = it->get<double>();
        if (!std::isfinite(d)) {
            return std::nullopt;
        }
        value = static_cast<std::int64_t>(std::floor(d));
    } else if (it->is_string()) {
        const auto& s = it->get_ref<const std::string&>();
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (value < 0) {
        return std::nullopt;
    }
    return value;
}

std::string string_field(const nlohmann::json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        return {};
    }
    return it->get<std::string>();
}

}  // namespace

std::string utc_month(std::int64_t epoch_seconds) {
    using namespace std::chrono;
    const sys_days day = floor<days>(sys_seconds{seconds{epoch_seconds}});
    const year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()));
    return buf;
}

MonthPartition partition_by_month(std::vector<nlohmann::json> records) {
    MonthPartition out;
    for (auto& rec : records) {
        const auto epoch = epoch_of(rec);
        if (!epoch) {
            ++out.warnings;
            out.buckets[std::string(kUnknownMonth)].push_back(std::move(rec));
            continue;
        }
        out.buckets[utc_month(*epoch)].push_back(std::move(rec));
    }
    if (out.warnings > 0) {
        spdlog::warn("{} record(s) without a usable created_utc routed to '{}'", out.warnings,
                     kUnknownMonth);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Records and threads

std::optional<SubmissionRecord> parse_submission(const nlohmann::json& j) {
    if (!j.is_object()) {
        return std::nullopt;
    }
    SubmissionRecord r;
    r.id = string_field(j, "id");
    const auto epoch = epoch_of(j);
    if (r.id.empty() || !epoch) {
        return std::nullopt;
    }
    r.created_utc = *epoch;
    r.title = string_field(j, "title");
    r.selftext = string_field(j, "selftext");
    r.subreddit = string_field(j, "subreddit");
    return r;
}

std::optional<CommentRecord> parse_comment(const nlohmann::json& j) {
    if (!j.is_object()) {
        return std::nullopt;
    }
    CommentRecord r;
    r.id = string_field(j, "id");
    r.link_id = string_field(j, "link_id");
    const auto epoch = epoch_of(j);
    if (r.id.empty() || !epoch || !r.link_id.starts_with("t3_")) {
        return std::nullopt;
    }
    r.created_utc = *epoch;
    r.body = string_field(j, "body");
    return r;
}

MergeResult merge_threads(const std::vector<SubmissionRecord>& submissions,
                          const std::vector<CommentRecord>& comments) {
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(submissions.size());
    for (std::size_t i = 0; i < submissions.size(); ++i) {
        index.emplace(submissions[i].id, i);
    }

    std::vector<std::vector<const CommentRecord*>> attached(submissions.size());
    MergeResult result;
    for (const auto& c : comments) {
        const std::string_view target = std::string_view(c.link_id).substr(
            c.link_id.starts_with("t3_") ? 3 : 0);
        const auto it = index.find(std::string(target));
        if (it == index.end()) {
            ++result.orphan_count;
            continue;
        }
        attached[it->second].push_back(&c);
    }

    result.threads.reserve(submissions.size());
    for (std::size_t i = 0; i < submissions.size(); ++i) {
        auto& list = attached[i];
        std::sort(list.begin(), list.end(), [](const CommentRecord* a, const CommentRecord* b) {
            return std::tie(a->created_utc, a->id) < std::tie(b->created_utc, b->id);
        });
        Thread t;
        t.id = submissions[i].id;
        t.comment_count = list.size();
        const auto append = [&t](const std::string& segment) {
            if (segment.empty()) {
                return;
            }
            if (!t.text.empty()) {
                t.text.push_back(' ');
            }
            t.text += segment;
        };
        append(submissions[i].title);
        append(submissions[i].selftext);
        for (const auto* c : list) {
            append(c->body);
        }
        result.threads.push_back(std::move(t));
    }
    return result;
}

MergeResult load_threads(const fs::path& submissions_path, const fs::path& comments_path,
                         LoadReport* report) {
    LoadReport local;
    std::vector<SubmissionRecord> submissions;
    std::vector<CommentRecord> comments;
    try {
        DumpReader rs(submissions_path);
        while (auto rec = rs.next()) {
            if (auto s = parse_submission(*rec)) {
                submissions.push_back(std::move(*s));
            } else {
                ++local.invalid_records;
            }
        }
        local.malformed_lines += rs.malformed_lines();

        DumpReader rc(comments_path);
        while (auto rec = rc.next()) {
            if (auto c = parse_comment(*rec)) {
                comments.push_back(std::move(*c));
            } else {
                ++local.invalid_records;
            }
        }
        local.malformed_lines += rc.malformed_lines();
    } catch (const IngestError& e) {
        spdlog::error("failed to load dumps: {}", e.what());
        throw;
    }
    local.submissions = submissions.size();
    local.comments = comments.size();
    auto merged = merge_threads(submissions, comments);
    local.orphan_comments = merged.orphan_count;
    if (local.malformed_lines + local.invalid_records > 0) {
        spdlog::warn("skipped {} malformed line(s) and {} invalid record(s)", local.malformed_lines,
                     local.invalid_records);
    }
    if (report != nullptr) {
        *report = local;
    }
    return merged;
}

std::pair<fs::path, fs::path> find_dump_pair(const fs::path& dir, const std::string& name) {
    const auto pick = [&](const std::string& prefix) {
        for (const char* ext : {".json", ".json.zst", ".zst", ".ndjson", ".ndjson.zst"}) {
            const auto candidate = dir / (prefix + name + ext);
            if (fs::is_regular_file(candidate)) {
                return candidate;
            }
        }
        throw IngestError("no " + prefix + name + " dump in " + dir.string());
    };
    return {pick("RS_"), pick("RC_")};
}

void to_json(nlohmann::json& j, const Thread& t) {
    j = {{"id", t.id}, {"text", t.text}, {"comment_count", t.comment_count}};
}

void from_json(const nlohmann::json& j, Thread& t) {
    j.at("id").get_to(t.id);
    j.at("text").get_to(t.text);
    j.at("comment_count").get_to(t.comment_count);
}

void write_threads_json(const fs::path& path, const std::vector<Thread>& threads) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IngestError("cannot write " + path.string());
    }
    out << nlohmann::json(threads).dump(1) << '\n';
}

std::vector<Thread> read_threads_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open threads file " + path.string());
    }
    try {
        return nlohmann::json::parse(in).get<std::vector<Thread>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid threads file " + path.string() + ": " + e.what());
    }
}

}  // namespace topicbench::ingest
