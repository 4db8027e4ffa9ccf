#include <algorithm>
#include <regex>

#include <spdlog/spdlog.h>

#include "io.hpp"
#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"
#include "topicbench/stats.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

using models::Method;

std::string model_id(Method method, const std::string& dataset) {
    return std::string(models::method_slug(method)) + "_" + dataset;
}

const std::vector<std::string>& report_metrics() {
    static const std::vector<std::string> m{"num_topics", "coherence", "diversity", "kl_divergence", "runtime_seconds"};
    return m;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::set<std::string> kConfigKeys{"datasets", "methods",   "stages",   "preprocess",      "lda", "nmf",
                                        "embed",    "embedder",  "selection", "metrics",        "chord_threshold",
                                        "seed"};

fs::path resolve_path(const json& v, const fs::path& base_dir, const std::string& what) {
    if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError(what + " must be a non-empty path string");
    fs::path p = v.get<std::string>();
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

json object_or_empty(const json& j, const char* key) {
    if (!j.contains(key)) return json::object();
    if (!j[key].is_object()) throw ConfigError(std::string("config: '") + key + "' must be an object");
    return j[key];
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kConfigKeys.count(key)) throw ConfigError("config: unknown key '" + key + "'");

    RunConfig c;
    try {
        if (!j.contains("datasets") || !j["datasets"].is_array() || j["datasets"].empty())
            throw ConfigError("config: 'datasets' must be a non-empty array");
        static const std::regex name_re("[A-Za-z0-9_-]+");
        std::set<std::string> names;
        for (const auto& d : j["datasets"]) {
            DatasetInput in;
            in.name = d.at("name").get<std::string>();
            if (!std::regex_match(in.name, name_re))
                throw ConfigError("config: dataset name '" + in.name + "' must match [A-Za-z0-9_-]+");
            if (!names.insert(in.name).second) throw ConfigError("config: duplicate dataset '" + in.name + "'");
            const std::string where = "dataset '" + in.name + "': ";
            if (d.contains("threads")) in.threads = resolve_path(d["threads"], base_dir, where + "threads");
            if (d.contains("dumps")) in.dumps = resolve_path(d["dumps"], base_dir, where + "dumps");
            if (d.contains("submissions"))
                in.submissions = resolve_path(d["submissions"], base_dir, where + "submissions");
            if (d.contains("comments")) in.comments = resolve_path(d["comments"], base_dir, where + "comments");
            in.subreddit = d.value("subreddit", in.name);
            const int sources = int(in.threads.has_value()) + int(in.dumps.has_value()) +
                                int(in.submissions.has_value() || in.comments.has_value());
            if (sources != 1)
                throw ConfigError(where + "give exactly one of threads, dumps, or submissions + comments");
            if (in.submissions.has_value() != in.comments.has_value())
                throw ConfigError(where + "submissions and comments must be given together");
            c.datasets.push_back(std::move(in));
        }

        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j["methods"]) {
                const Method method = models::parse_method(m.get<std::string>());
                if (std::find(c.methods.begin(), c.methods.end(), method) != c.methods.end())
                    throw ConfigError("config: duplicate method " + m.get<std::string>());
                c.methods.push_back(method);
            }
            if (c.methods.empty()) throw ConfigError("config: 'methods' must not be empty");
        }

        if (j.contains("stages")) {
            c.stages = j["stages"].get<std::vector<std::string>>();
            const auto& all = all_stages();
            if (c.stages.empty() || c.stages.size() > all.size() ||
                !std::equal(c.stages.begin(), c.stages.end(), all.begin()))
                throw ConfigError("config: 'stages' must be a prefix of ingest, preprocess, train, metrics, stats");
        }

        c.preprocess = object_or_empty(j, "preprocess");
        c.lda = object_or_empty(j, "lda");
        c.nmf = object_or_empty(j, "nmf");
        c.embed = object_or_empty(j, "embed");
        c.embedder = object_or_empty(j, "embedder");
        c.seed = j.value("seed", c.seed);

        for (const Method m : c.methods) c.selection[m] = default_selection(m);
        const json selection = object_or_empty(j, "selection");
        for (const auto& [key, s] : selection.items()) {
            const Method m = models::parse_method(key);
            SelectionConfig sel = default_selection(m);
            sel.strategy = s.value("strategy", sel.strategy);
            sel.grid = s.value("grid", sel.grid);
            sel.runs = s.value("runs", sel.runs);
            const bool bow = m != Method::Embed;
            if (sel.strategy != "fixed" && sel.strategy != (bow ? "sweep" : "median"))
                throw ConfigError("config: selection for " + key + " must be \"fixed\" or \"" +
                                  (bow ? "sweep" : "median") + "\"");
            if (sel.strategy == "sweep" && sel.grid.empty()) throw ConfigError("config: empty selection grid");
            if (sel.strategy == "median" && (sel.runs < 1 || sel.runs % 2 == 0))
                throw ConfigError("config: median selection runs must be odd and >= 1");
            c.selection[m] = std::move(sel);
        }

        const json mj = object_or_empty(j, "metrics");
        c.metrics.coherence.top_k = mj.value("top_k", c.metrics.coherence.top_k);
        c.metrics.coherence.window = mj.value("window", c.metrics.coherence.window);
        c.metrics.diversity_top_k = mj.value("diversity_top_k", c.metrics.diversity_top_k);
        c.metrics.epsilon = mj.value("epsilon", c.metrics.epsilon);
        c.metrics.coherence.epsilon = c.metrics.epsilon;

        c.chord_threshold = j.value("chord_threshold", c.chord_threshold);
        if (!(c.chord_threshold >= 0.0 && c.chord_threshold <= 1.0))
            throw ConfigError("config: chord_threshold must lie in [0, 1]");

        // Surface trainer config errors before any stage runs.
        preprocess::PreprocessConfig pc = c.preprocess.get<preprocess::PreprocessConfig>();
        pc.validate();
        (void)c.lda.get<models::LdaConfig>();
        (void)c.nmf.get<models::NmfConfig>();
        (void)c.embed.get<models::EmbedClusterConfig>();
        (void)models::make_embedder(c.embedder);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

using preprocess::TokenSet;

struct DatasetState {
    std::vector<ingest::Thread> threads;
    std::vector<TokenSet> bow;
    std::vector<TokenSet> embed;
    std::map<Method, TopicModelResult> models;
    std::vector<metrics::MetricsReport> reports;
};

class Runner {
public:
    Runner(const RunConfig& cfg, RunManifest& manifest, fs::path staging)
        : cfg_(cfg), manifest_(manifest), staging_(std::move(staging)) {}

    void run_stage(const std::string& name) {
        if (name == "ingest") ingest();
        else if (name == "preprocess") preprocess();
        else if (name == "train") train();
        else if (name == "metrics") evaluate();
        else if (name == "stats") compare();
    }

private:
    fs::path dataset_dir(const std::string& ds) const { return staging_ / ds; }

    void record(const std::string& kind, const std::string& dataset, const std::string& method, const fs::path& file,
                bool volatile_content = false) {
        ArtifactRef a;
        a.kind = kind;
        a.dataset = dataset;
        a.method = method;
        a.path = "runs/" + manifest_.run_id + "/" + detail::relative_to(file, staging_);
        a.sha256 = file_sha256(file);
        a.volatile_content = volatile_content;
        manifest_.artifacts.push_back(std::move(a));
    }

    void ingest() {
        for (const auto& in : cfg_.datasets) {
            auto& st = state_[in.name];
            if (in.threads) {
                if (!fs::exists(*in.threads)) throw IngestError("threads file not found: " + in.threads->string());
                st.threads = ingest::read_threads_json(*in.threads);
            } else {
                fs::path rs, rc;
                if (in.dumps) {
                    if (!fs::is_directory(*in.dumps)) throw IngestError("dump directory not found: " + in.dumps->string());
                    std::tie(rs, rc) = ingest::find_dump_pair(*in.dumps, in.subreddit);
                } else {
                    rs = *in.submissions;
                    rc = *in.comments;
                }
                ingest::LoadReport report;
                st.threads = ingest::load_threads(rs, rc, &report).threads;
                spdlog::info("ingest {}: {} submissions, {} comments, {} orphan comments, {} invalid records",
                             in.name, report.submissions, report.comments, report.orphan_comments,
                             report.invalid_records);
            }
            if (st.threads.empty()) throw IngestError("dataset '" + in.name + "' has no threads");
            const fs::path out = dataset_dir(in.name) / "threads.json";
            fs::create_directories(out.parent_path());
            ingest::write_threads_json(out, st.threads);
            record("threads", in.name, "", out);
        }
    }

    void preprocess() {
        const auto pc = cfg_.preprocess.get<preprocess::PreprocessConfig>();
        for (const auto& in : cfg_.datasets) {
            auto& st = state_.at(in.name);
            st.bow = preprocess::run_pipeline(st.threads, pc, preprocess::ModelPath::BagOfWords);
            st.embed = preprocess::run_pipeline(st.threads, pc, preprocess::ModelPath::Embedding);
            const fs::path bow = dataset_dir(in.name) / "tokens_bow.json";
            const fs::path emb = dataset_dir(in.name) / "tokens_embed.json";
            preprocess::write_token_sets(bow, st.bow);
            preprocess::write_token_sets(emb, st.embed);
            record("tokens", in.name, "bow", bow);
            record("tokens", in.name, "embed", emb);
        }
    }

    void train() {
        for (const auto& in : cfg_.datasets) {
            auto& st = state_.at(in.name);
            json seeds = json::object();
            for (const Method m : cfg_.methods) {
                const std::string slug(models::method_slug(m));
                TrainingSpec spec;
                spec.method = m;
                spec.config = m == Method::Lda ? cfg_.lda : m == Method::Nmf ? cfg_.nmf : cfg_.embed;
                spec.embedder = cfg_.embedder;
                spec.seed = cfg_.seed;
                spec.selection = cfg_.selection.at(m);
                spec.coherence = cfg_.metrics.coherence;
                auto outcome = train_with_selection(spec, m == Method::Embed ? st.embed : st.bow, in.name);
                seeds.update(outcome.seeds);
                const json& selection = outcome.selection;
                TopicModelResult model = std::move(outcome.model);
                const fs::path sel = dataset_dir(in.name) / ("selection_" + slug + ".json");
                detail::write_json_atomic(sel, selection);
                record("selection", in.name, std::string(models::method_name(m)), sel);
                const fs::path out = dataset_dir(in.name) / ("model_" + model_id(m, in.name) + ".json");
                models::write_model(out, model);
                record("model", in.name, std::string(models::method_name(m)), out);
                st.models[m] = std::move(model);
            }
            manifest_.seeds[in.name] = seeds;
        }
    }

    void evaluate() {
        for (const auto& in : cfg_.datasets) {
            auto& st = state_.at(in.name);
            st.reports.clear();
            for (const Method m : cfg_.methods) {
                const auto& model = st.models.at(m);
                // Coherence and KL share the bag-of-words reference; perplexity is in-sample.
                const auto& own = m == Method::Embed ? st.embed : st.bow;
                st.reports.push_back(metrics::evaluate(model, in.name, st.bow, own, cfg_.metrics));
                st.reports.back().method = std::string(models::method_name(m));
            }
            const fs::path out = dataset_dir(in.name) / ("metrics_" + in.name + ".json");
            metrics::write_metrics_json(out, st.reports);
            record("metrics", in.name, "", out, true);
        }
    }

    void compare() {
        std::vector<metrics::MetricsReport> all;
        for (const auto& in : cfg_.datasets) {
            const auto& r = state_.at(in.name).reports;
            all.insert(all.end(), r.begin(), r.end());
        }
        json tables = json::object();
        for (const auto& metric : report_metrics()) {
            stats::MetricTable t;
            t.metric = metric;
            for (const Method m : cfg_.methods) t.columns.emplace_back(models::method_name(m));
            for (const auto& in : cfg_.datasets) {
                t.rows.push_back(in.name);
                std::vector<double> row;
                for (const auto& r : state_.at(in.name).reports) row.push_back(metrics::metric_value(r, metric));
                t.values.push_back(std::move(row));
            }
            json entry;
            try {
                entry = stats::compare_metric_table(t);
            } catch (const std::exception& e) {
                entry = {{"metric", metric}, {"error", e.what()}};
                spdlog::warn("stats {}: {}", metric, e.what());
            }
            for (std::size_t c = 0; c < t.columns.size(); ++c) {
                const auto col = t.column(c);
                if (std::all_of(col.begin(), col.end(), [](double v) { return std::isfinite(v); })) {
                    const auto s = stats::describe(col);
                    entry["summary"][t.columns[c]] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max}};
                } else {
                    entry["summary"][t.columns[c]] = nullptr;
                }
            }
            tables[metric] = std::move(entry);
        }
        const fs::path out = staging_ / "stats_report.json";
        detail::write_json_atomic(out, json{{"tables", tables}});
        record("stats", "", "", out, true);
    }

    const RunConfig& cfg_;
    RunManifest& manifest_;
    fs::path staging_;
    std::map<std::string, DatasetState> state_;
};

}  // namespace

RunManifest run_pipeline(Workspace& workspace, const json& config, const fs::path& base_dir) {
    const RunConfig cfg = RunConfig::from_json(config, base_dir);

    RunManifest manifest;
    manifest.config = config;
    manifest.config_hash = config_hash(config);
    manifest.run_id = "run-" + manifest.config_hash.substr(0, 12);
    manifest.created_at = utc_timestamp();
    manifest.seeds = {{"base", cfg.seed}};

    const fs::path final_dir = workspace.run_dir(manifest.run_id);
    fs::path staging = final_dir;
    staging += ".staging";
    fs::remove_all(staging);
    fs::create_directories(staging);
    spdlog::info("run {}: stages {}", manifest.run_id, fmt::join(cfg.stages, ", "));

    Runner runner(cfg, manifest, staging);
    for (const auto& stage : cfg.stages) {
        StageRecord rec;
        rec.name = stage;
        rec.started_at = utc_timestamp();
        try {
            runner.run_stage(stage);
            rec.status = "ok";
        } catch (const std::exception& e) {
            rec.status = "failed";
            rec.error = e.what();
            manifest.status = "failed";
            manifest.failed_stage = stage;
            manifest.error = e.what();
            spdlog::error("run {}: stage {} failed: {}", manifest.run_id, stage, e.what());
        }
        rec.finished_at = utc_timestamp();
        manifest.stages.push_back(std::move(rec));
        if (manifest.status == "failed") break;
    }
    manifest.finished_at = utc_timestamp();

    fs::remove_all(final_dir);
    if (manifest.status == "failed") {
        // Nothing partial survives a failed run, only its manifest.
        fs::remove_all(staging);
        manifest.artifacts.clear();
        fs::create_directories(final_dir);
    } else {
        manifest.status = "complete";
        fs::rename(staging, final_dir);
    }
    detail::write_json_atomic(final_dir / "manifest.json", manifest);
    if (manifest.status == "complete") workspace.register_run(manifest);
    return manifest;
}

}  // namespace topicbench::workbench
