#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicbench/ingest.hpp"
#include "topicbench/metrics.hpp"
#include "topicbench/models.hpp"
#include "topicbench/selection.hpp"

namespace topicbench::workbench {

namespace fs = std::filesystem;
using models::TopicModelResult;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::string_view data);
std::string file_sha256(const fs::path& path);

/// Object keys sorted, no whitespace.
std::string canonical_json(const json& value);

/// SHA-256 of the canonical JSON text.
std::string config_hash(const json& config);

// ---------------------------------------------------------------------------
// Chord graph

inline constexpr double kDefaultMembershipThreshold = 0.1;

struct ChordNode {
    int topic_id = 0;
    std::vector<std::string> words;
    std::size_t size = 0;  // documents belonging to the topic under the threshold rule

    friend bool operator==(const ChordNode&, const ChordNode&) = default;
};

struct ChordEdge {
    int source = 0;  // source < target
    int target = 0;
    std::size_t shared = 0;

    friend bool operator==(const ChordEdge&, const ChordEdge&) = default;
};

struct ChordGraph {
    std::string model;
    double threshold = kDefaultMembershipThreshold;
    std::vector<ChordNode> nodes;
    std::vector<ChordEdge> edges;  // only pairs sharing at least one document

    friend bool operator==(const ChordGraph&, const ChordGraph&) = default;
};

void to_json(json& j, const ChordGraph& g);
void from_json(const json& j, ChordGraph& g);

/// A document belongs to topic t when its membership is >= threshold (soft
/// models) or its hard label is t. Outliers belong to no topic.
ChordGraph chord_graph(const TopicModelResult& model, double threshold = kDefaultMembershipThreshold,
                       std::size_t top_words = 10, std::string model_id = {});

// ---------------------------------------------------------------------------
// Rankings

inline constexpr std::size_t kMaxDesirabilityWords = 5;

struct RankingRecord {
    std::string dataset;
    std::string reviewer;
    std::vector<std::string> ordering;                        // best first, canonical method names
    std::map<std::string, std::vector<std::string>> words;    // method -> picked words
    std::string notes;
    std::string timestamp;                                    // ISO-8601 UTC

    friend bool operator==(const RankingRecord&, const RankingRecord&) = default;
};

void to_json(json& j, const RankingRecord& r);
void from_json(const json& j, RankingRecord& r);

struct FieldError {
    std::string field;
    std::string message;
};

void to_json(json& j, const FieldError& e);

/// The shipped desirability word list.
const std::vector<std::string>& default_desirability_words();

/// Checks a raw ranking payload. On success `out` holds the normalised
/// record (method names canonicalised, timestamp filled when absent).
std::vector<FieldError> validate_ranking(const json& body, const std::vector<std::string>& available_methods,
                                         const std::set<std::string>& word_list, RankingRecord& out);

/// Append-only JSON-lines store; appends are serialised.
class RankingStore {
public:
    explicit RankingStore(fs::path path);

    void append(const RankingRecord& record);
    std::vector<RankingRecord> list(const std::string& dataset = {}) const;
    const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
    mutable std::mutex mutex_;
};

/// Friedman + Nemenyi over reviewer orderings (blocks = records, values =
/// rank positions). Records that do not rank every method are skipped.
json ranking_statistics(const std::vector<RankingRecord>& records, const std::vector<std::string>& methods);

// ---------------------------------------------------------------------------
// Run configuration

struct DatasetInput {
    std::string name;
    std::optional<fs::path> threads;      // threads.json
    std::optional<fs::path> dumps;        // directory holding RS_/RC_ dumps
    std::optional<fs::path> submissions;  // explicit dump pair
    std::optional<fs::path> comments;
    std::string subreddit;                // dump name inside `dumps`; defaults to name
};

struct SelectionConfig {
    std::string strategy;  // "fixed", "sweep" or "median"
    std::vector<int> grid = models::default_topic_grid();
    int runs = 11;
};

/// Sweep for the bag-of-words models, median over seeds for EMBED.
SelectionConfig default_selection(models::Method method);

/// Drops documents with no tokens; throws ValidationError if none remain.
std::vector<preprocess::TokenSet> drop_empty(const std::vector<preprocess::TokenSet>& sets, const std::string& label);

struct TrainingSpec {
    models::Method method = models::Method::Lda;
    json config = json::object();    // the method's trainer options
    json embedder = json::object();  // EMBED only
    std::uint64_t seed = 42;         // used unless `config` sets its own
    SelectionConfig selection;
    metrics::CoherenceOptions coherence;
};

struct TrainingOutcome {
    TopicModelResult model;
    json selection;  // sweep or median record
    json seeds;      // {"<slug>": seed} plus "embed_selected" for median runs
};

/// Trains one method on `token_sets` and applies its topic-count selection.
TrainingOutcome train_with_selection(const TrainingSpec& spec, const std::vector<preprocess::TokenSet>& token_sets,
                                     const std::string& label);

inline const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> s{"ingest", "preprocess", "train", "metrics", "stats"};
    return s;
}

struct RunConfig {
    std::vector<DatasetInput> datasets;
    std::vector<models::Method> methods{models::Method::Lda, models::Method::Nmf, models::Method::Embed};
    std::vector<std::string> stages = all_stages();
    json preprocess = json::object();
    json lda = json::object();
    json nmf = json::object();
    json embed = json::object();
    json embedder = json::object();
    std::map<models::Method, SelectionConfig> selection;
    metrics::EvaluateOptions metrics;
    double chord_threshold = kDefaultMembershipThreshold;
    std::uint64_t seed = 42;

    /// Parses and validates; paths are resolved against `base_dir`.
    static RunConfig from_json(const json& j, const fs::path& base_dir = {});
};

// ---------------------------------------------------------------------------
// Workspace and manifests

struct ArtifactRef {
    std::string kind;  // threads, tokens, model, selection, metrics, stats
    std::string dataset;
    std::string method;
    std::string path;  // relative to the workspace root
    std::string sha256;
    bool volatile_content = false;  // holds wall-clock timings

    friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

struct StageRecord {
    std::string name;
    std::string status;  // "ok" or "failed"
    std::string started_at;
    std::string finished_at;
    std::string error;
};

struct RunManifest {
    std::string run_id;
    std::string config_hash;
    json config = json::object();
    std::string status;  // "complete" or "failed"
    std::string failed_stage;
    std::string error;
    std::string created_at;
    std::string finished_at;
    std::vector<StageRecord> stages;
    std::vector<ArtifactRef> artifacts;
    json seeds = json::object();

    bool has_stage(const std::string& name) const;
    std::vector<ArtifactRef> artifacts_of(const std::string& kind) const;
};

void to_json(json& j, const ArtifactRef& a);
void from_json(const json& j, ArtifactRef& a);
void to_json(json& j, const StageRecord& s);
void from_json(const json& j, StageRecord& s);
void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);

/// Dataset entry of the registry, pointing at the latest complete run.
struct DatasetEntry {
    std::string name;
    std::string run_id;
    std::string threads;  // relative paths
    std::map<std::string, std::string> models;  // model id -> path
    std::string metrics;
};

void to_json(json& j, const DatasetEntry& e);
void from_json(const json& j, DatasetEntry& e);

/// Layout:
///   runs/<run_id>/manifest.json and artifacts
///   reports/<run_id>/
///   registry.json, rankings.jsonl, desirability_words.json (optional)
class Workspace {
public:
    explicit Workspace(fs::path root);

    const fs::path& root() const noexcept { return root_; }
    fs::path run_dir(const std::string& run_id) const;
    fs::path report_dir(const std::string& run_id) const;
    fs::path resolve(const std::string& relative) const { return root_ / relative; }

    std::vector<std::string> run_ids() const;
    RunManifest load_manifest(const std::string& run_id) const;  // NotFoundError

    std::map<std::string, DatasetEntry> registry() const;
    void register_run(const RunManifest& manifest);

    /// Problems found re-checking a manifest (missing files, hash drift).
    std::vector<std::string> verify(const std::string& run_id) const;

    std::vector<std::string> desirability_words() const;
    RankingStore& rankings() { return rankings_; }
    const RankingStore& rankings() const { return rankings_; }

private:
    fs::path root_;
    RankingStore rankings_;
    mutable std::mutex registry_mutex_;
};

/// Model id used by the API and file names: "<method slug>_<dataset>".
std::string model_id(models::Method method, const std::string& dataset);

/// Runs every configured stage; artifacts are staged and only committed
/// when all stages succeed. A failed run leaves just its manifest behind.
RunManifest run_pipeline(Workspace& workspace, const json& config, const fs::path& base_dir = {});

struct ReportBundle {
    fs::path directory;
    std::vector<fs::path> metric_tables;
    fs::path stats;
    std::vector<fs::path> chords;
};

/// Metric CSVs (one per table, rows = datasets, columns = methods), the
/// stats JSON and one chord JSON per model. Unknown run -> NotFoundError;
/// a run missing a stage or artifact -> ValidationError naming it.
ReportBundle export_report(const Workspace& workspace, const std::string& run_id,
                           double chord_threshold = kDefaultMembershipThreshold);

/// The five tables of the report, in order.
const std::vector<std::string>& report_metrics();

std::string utc_timestamp();

}  // namespace topicbench::workbench
