#include <algorithm>

#include <spdlog/spdlog.h>

#include "io.hpp"
#include "topicbench/error.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

ReportBundle export_report(const Workspace& workspace, const std::string& run_id, double chord_threshold) {
    const RunManifest m = workspace.load_manifest(run_id);
    if (m.status != "complete")
        throw ValidationError("run " + run_id + " did not complete (failed stage: " +
                              (m.failed_stage.empty() ? std::string("unknown") : m.failed_stage) + ")");
    std::vector<std::string> missing;
    for (const auto& stage : all_stages())
        if (!m.has_stage(stage)) missing.push_back("stage " + stage);
    for (const auto& a : m.artifacts)
        if (!fs::exists(workspace.resolve(a.path))) missing.push_back(a.path);
    if (m.artifacts_of("stats").empty() && m.has_stage("stats")) missing.push_back("stats_report.json");
    if (!missing.empty())
        throw ValidationError("run " + run_id + " is incomplete, missing: " + fmt::format("{}", fmt::join(missing, ", ")));

    ReportBundle bundle;
    bundle.directory = workspace.report_dir(run_id);
    fs::create_directories(bundle.directory);

    std::vector<metrics::MetricsReport> reports;
    for (const auto& a : m.artifacts_of("metrics")) {
        auto r = metrics::read_metrics_json(workspace.resolve(a.path));
        reports.insert(reports.end(), r.begin(), r.end());
    }
    for (const auto& metric : report_metrics()) {
        const fs::path out = bundle.directory / (metric + ".csv");
        detail::write_atomic(out, metrics::metric_table_csv(reports, metric));
        bundle.metric_tables.push_back(out);
    }

    json stats = detail::read_json_file(workspace.resolve(m.artifacts_of("stats").front().path));
    const auto rankings = workspace.rankings().list();
    if (!rankings.empty()) {
        std::vector<std::string> methods;
        for (const auto& a : m.artifacts_of("model"))
            if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) methods.push_back(a.method);
        std::set<std::string> datasets;
        for (const auto& a : m.artifacts_of("model")) datasets.insert(a.dataset);
        std::vector<RankingRecord> relevant;
        std::copy_if(rankings.begin(), rankings.end(), std::back_inserter(relevant),
                     [&](const RankingRecord& r) { return datasets.count(r.dataset) > 0; });
        stats["rankings"] = ranking_statistics(relevant, methods);
    }
    bundle.stats = bundle.directory / "stats_report.json";
    detail::write_json_atomic(bundle.stats, stats);

    for (const auto& a : m.artifacts_of("model")) {
        const auto model = models::read_model(workspace.resolve(a.path));
        const std::string id = model_id(models::parse_method(a.method), a.dataset);
        const fs::path out = bundle.directory / ("chord_" + id + ".json");
        detail::write_json_atomic(out, chord_graph(model, chord_threshold, 10, id));
        bundle.chords.push_back(out);
    }
    spdlog::info("report {}: {} tables, {} chord graphs in {}", run_id, bundle.metric_tables.size(),
                 bundle.chords.size(), bundle.directory.string());
    return bundle;
}

}  // namespace topicbench::workbench
