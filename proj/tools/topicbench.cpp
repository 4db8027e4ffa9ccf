#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "topicbench/api.hpp"
#include "topicbench/error.hpp"
#include "topicbench/ingest.hpp"
#include "topicbench/metrics.hpp"
#include "topicbench/models.hpp"
#include "topicbench/preprocess.hpp"
#include "topicbench/stats.hpp"
#include "topicbench/workbench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace topicbench;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json optional_json(const std::string& path) {
    return path.empty() ? json::object() : read_json(path);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Writes to `path`, or to stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
    } else {
        write_text(path, text);
    }
}

std::vector<preprocess::TokenSet> read_tokens(const std::string& path) {
    return preprocess::read_token_sets(path);
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string submissions, comments, dumps, name, out;
};

void cmd_ingest(const IngestArgs& a) {
    fs::path rs = a.submissions, rc = a.comments;
    if (!a.dumps.empty()) {
        if (a.name.empty()) throw ConfigError("--dumps needs --name");
        std::tie(rs, rc) = ingest::find_dump_pair(a.dumps, a.name);
    } else if (rs.empty() || rc.empty()) {
        throw ConfigError("give --dumps and --name, or both --submissions and --comments");
    }
    ingest::LoadReport report;
    const auto merged = ingest::load_threads(rs, rc, &report);
    ingest::write_threads_json(a.out, merged.threads);
    spdlog::info("{} threads from {} submissions and {} comments ({} orphan comments, {} invalid records, "
                 "{} malformed lines) -> {}",
                 merged.threads.size(), report.submissions, report.comments, report.orphan_comments,
                 report.invalid_records, report.malformed_lines, a.out);
}

struct PreprocessArgs {
    std::string threads, out, path = "bow", config;
};

void cmd_preprocess(const PreprocessArgs& a) {
    const auto config = optional_json(a.config).get<preprocess::PreprocessConfig>();
    const auto threads = ingest::read_threads_json(a.threads);
    preprocess::PipelineStats stats;
    const auto path = a.path == "embed" ? preprocess::ModelPath::Embedding : preprocess::ModelPath::BagOfWords;
    const auto sets = preprocess::run_pipeline(threads, config, path, &stats);
    preprocess::write_token_sets(a.out, sets);
    spdlog::info("{} documents, {} tokens after cleanup, {} after filtering, {} bigrams -> {}", stats.documents,
                 stats.tokens_after_cleanup, stats.tokens_after_filter, stats.bigrams_promoted, a.out);
}

struct TrainArgs {
    std::string method, tokens, out, config, embedder, selection_out;
    std::string strategy = "fixed";
    std::vector<int> grid;
    int topics = 0;
    int runs = 11;
    std::uint64_t seed = 42;
};

void cmd_train(const TrainArgs& a) {
    workbench::TrainingSpec spec;
    spec.method = models::parse_method(a.method);
    spec.config = optional_json(a.config);
    if (a.topics > 0) spec.config["num_topics"] = a.topics;
    spec.embedder = optional_json(a.embedder);
    spec.seed = a.seed;
    spec.selection = workbench::default_selection(spec.method);
    spec.selection.strategy = a.strategy;
    if (!a.grid.empty()) spec.selection.grid = a.grid;
    spec.selection.runs = a.runs;
    if (a.strategy == "median" && a.runs % 2 == 0) throw ConfigError("--runs must be odd");

    const auto outcome = workbench::train_with_selection(spec, read_tokens(a.tokens), a.tokens);
    models::write_model(a.out, outcome.model);
    if (!a.selection_out.empty()) {
        write_text(a.selection_out, json{{"selection", outcome.selection}, {"seeds", outcome.seeds}}.dump(2));
    }
    spdlog::info("{}: {} topics in {:.2f}s -> {}", models::method_name(spec.method), outcome.model.num_topics(),
                 outcome.model.runtime_seconds, a.out);
}

struct EvaluateArgs {
    std::vector<std::string> models;
    std::string reference, held_out, dataset, out;
};

void cmd_evaluate(const EvaluateArgs& a) {
    const auto reference = read_tokens(a.reference);
    const auto held_out = a.held_out.empty() ? reference : read_tokens(a.held_out);
    std::vector<metrics::MetricsReport> reports;
    for (const auto& path : a.models) {
        const auto model = models::read_model(path);
        reports.push_back(metrics::evaluate(model, a.dataset, reference, held_out));
        reports.back().method = std::string(models::method_name(model.method));
    }
    if (a.out.empty() || a.out == "-") {
        emit(a.out, json(reports).dump(2));
    } else {
        metrics::write_metrics_json(a.out, reports);
        spdlog::info("{} metric reports -> {}", reports.size(), a.out);
    }
}

struct CompareArgs {
    std::vector<std::string> tables, metrics_files, metrics;
    std::string out, pairs;
};

void cmd_compare(const CompareArgs& a) {
    std::vector<stats::MetricTable> tables;
    // A table is named after its file, as `report` writes them: coherence.csv.
    for (const auto& path : a.tables) tables.push_back(stats::read_metric_table_csv(path, fs::path(path).stem()));
    if (!a.metrics_files.empty()) {
        std::vector<metrics::MetricsReport> reports;
        for (const auto& path : a.metrics_files) {
            const auto r = metrics::read_metrics_json(path);
            reports.insert(reports.end(), r.begin(), r.end());
        }
        const auto& names = a.metrics.empty() ? workbench::report_metrics() : a.metrics;
        for (const auto& metric : names) {
            tables.push_back(stats::parse_metric_table_csv(metrics::metric_table_csv(reports, metric), metric));
        }
    }
    if (tables.empty()) throw ConfigError("give at least one --table or --metrics file");

    json out = json::object();
    std::vector<std::pair<std::string, stats::StatTestResult>> pairs;
    for (const auto& t : tables) {
        const std::string& name = t.metric;
        json entry;
        try {
            entry = stats::compare_metric_table(t);
        } catch (const ValidationError& e) {
            entry = {{"metric", name}, {"error", e.what()}};
        }
        if (entry.contains("tukey_hsd")) pairs.emplace_back(name, entry["tukey_hsd"].get<stats::StatTestResult>());
        out[name] = std::move(entry);
    }
    emit(a.out, json{{"tables", out}}.dump(2));
    if (!a.pairs.empty()) write_text(a.pairs, stats::format_pairwise_csv(pairs));
}

void cmd_run(const std::string& config, const std::string& workspace) {
    workbench::Workspace ws(workspace);
    const auto manifest = workbench::run_pipeline(ws, read_json(config), fs::path(config).parent_path());
    std::cout << manifest.run_id << '\n';
    if (manifest.status != "complete") {
        throw PipelineError(manifest.failed_stage, "run " + manifest.run_id + " failed; see its manifest");
    }
}

void cmd_report(const std::string& workspace, const std::string& run, double threshold) {
    const workbench::Workspace ws(workspace);
    const auto bundle = workbench::export_report(ws, run, threshold);
    std::cout << bundle.directory.string() << '\n';
}

int cmd_verify(const std::string& workspace, const std::string& run) {
    const workbench::Workspace ws(workspace);
    const auto problems = ws.verify(run);
    for (const auto& p : problems) std::cout << p << '\n';
    if (problems.empty()) std::cout << run << ": ok\n";
    return problems.empty() ? 0 : 1;
}

void cmd_serve(const std::string& workspace, const api::ServerOptions& options) {
    // Block the stop signals before the server thread exists so it inherits
    // the mask; the main thread then waits for them synchronously.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

    workbench::Workspace ws(workspace);
    api::Server server(ws, options);
    const int port = server.start();
    spdlog::info("serving {} on {}:{}", workspace, options.host, port);
    int received = 0;
    sigwait(&stop_signals, &received);
    spdlog::info("signal {}, shutting down", received);
    server.stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"topicbench: topic model comparison workbench"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Merge a submissions/comments dump pair into threads");
    ingest->add_option("--submissions", ingest_args.submissions, "RS_ dump (plain or .zst)");
    ingest->add_option("--comments", ingest_args.comments, "RC_ dump (plain or .zst)");
    ingest->add_option("--dumps", ingest_args.dumps, "Directory holding RS_<name> and RC_<name>");
    ingest->add_option("--name", ingest_args.name, "Dump name inside --dumps");
    ingest->add_option("-o,--out", ingest_args.out, "threads.json to write")->required();

    PreprocessArgs pre_args;
    auto* pre = app.add_subcommand("preprocess", "Turn threads into token sets");
    pre->add_option("--threads", pre_args.threads, "threads.json")->required()->check(CLI::ExistingFile);
    pre->add_option("--path", pre_args.path, "bow or embed")->check(CLI::IsMember({"bow", "embed"}));
    pre->add_option("--config", pre_args.config, "Preprocess options (JSON)")->check(CLI::ExistingFile);
    pre->add_option("-o,--out", pre_args.out, "Token sets to write")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train one model with a fixed topic count");
    auto* select = app.add_subcommand("select", "Train one model and choose its topic count");
    for (auto* sub : {train, select}) {
        sub->add_option("--tokens", train_args.tokens, "Token sets")->required()->check(CLI::ExistingFile);
        sub->add_option("--config", train_args.config, "Trainer options (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--embedder", train_args.embedder, "Embedder options (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--seed", train_args.seed, "Seed unless the trainer options set one");
        sub->add_option("-o,--out", train_args.out, "Model JSON to write")->required();
    }
    train->add_option("--method", train_args.method, "lda, nmf or embed")
        ->required()
        ->check(CLI::IsMember({"lda", "nmf", "embed"}, CLI::ignore_case));
    train->add_option("--topics", train_args.topics, "Topic count (LDA, NMF)")->check(CLI::PositiveNumber);
    select->add_option("--method", train_args.method, "lda, nmf or embed")
        ->required()
        ->check(CLI::IsMember({"lda", "nmf", "embed"}, CLI::ignore_case));
    select->add_option("--strategy", train_args.strategy, "sweep (coherence over a grid) or median (over seeds)")
        ->required()
        ->check(CLI::IsMember({"sweep", "median"}));
    select->add_option("--grid", train_args.grid, "Topic counts for the sweep")->delimiter(',');
    select->add_option("--runs", train_args.runs, "Seeded runs for the median")->check(CLI::PositiveNumber);
    select->add_option("--selection-out", train_args.selection_out, "Selection record JSON to write");

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Compute metrics for trained models");
    eval->add_option("--model", eval_args.models, "Model JSON (repeatable)")->required()->check(CLI::ExistingFile);
    eval->add_option("--reference", eval_args.reference, "Bag-of-words token sets for coherence and KL")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--held-out", eval_args.held_out, "Token sets for perplexity; defaults to --reference")
        ->check(CLI::ExistingFile);
    eval->add_option("--dataset", eval_args.dataset, "Dataset label")->required();
    eval->add_option("-o,--out", eval_args.out, "metrics JSON to write (default stdout)");

    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "ANOVA and Tukey HSD over metric tables");
    cmp->add_option("--table", cmp_args.tables, "Metric table CSV (repeatable)")->check(CLI::ExistingFile);
    cmp->add_option("--metrics", cmp_args.metrics_files, "metrics JSON from evaluate or a run (repeatable)")
        ->check(CLI::ExistingFile);
    cmp->add_option("--metric", cmp_args.metrics, "Metric to tabulate from --metrics (repeatable)")
        ->check(CLI::IsMember(metrics::metric_names()));
    cmp->add_option("-o,--out", cmp_args.out, "stats report JSON (default stdout)");
    cmp->add_option("--pairs", cmp_args.pairs, "Pairwise comparisons CSV to write");

    std::string workspace = ".";
    std::string config, run_id;
    double threshold = workbench::kDefaultMembershipThreshold;

    auto* run = app.add_subcommand("run", "Run a configured pipeline into a workspace");
    run->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--workspace", workspace, "Workspace root");

    auto* report = app.add_subcommand("report", "Export metric tables, stats and chord graphs for a run");
    report->add_option("--workspace", workspace, "Workspace root")->check(CLI::ExistingDirectory);
    report->add_option("--run", run_id, "Run id")->required();
    report->add_option("--threshold", threshold, "Chord membership threshold")->check(CLI::Range(0.0, 1.0));

    auto* verify = app.add_subcommand("verify", "Re-check a run's config hash and artifact digests");
    verify->add_option("--workspace", workspace, "Workspace root")->check(CLI::ExistingDirectory);
    verify->add_option("--run", run_id, "Run id")->required();

    api::ServerOptions server_options;
    auto* serve = app.add_subcommand("serve", "Serve the workbench HTTP API");
    serve->add_option("--workspace", workspace, "Workspace root")->check(CLI::ExistingDirectory);
    serve->add_option("--port", server_options.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", server_options.host, "Bind address");
    serve->add_option("--static", server_options.static_dir, "UI assets served at /")
        ->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    // stdout carries command output (run ids, JSON); logs go to stderr.
    spdlog::set_default_logger(spdlog::stderr_color_mt("topicbench"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*ingest) cmd_ingest(ingest_args);
        if (*pre) cmd_preprocess(pre_args);
        if (*train) cmd_train(train_args);
        if (*select) cmd_train(train_args);
        if (*eval) cmd_evaluate(eval_args);
        if (*cmp) cmd_compare(cmp_args);
        if (*run) cmd_run(config, workspace);
        if (*report) cmd_report(workspace, run_id, threshold);
        if (*verify) return cmd_verify(workspace, run_id);
        if (*serve) cmd_serve(workspace, server_options);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
