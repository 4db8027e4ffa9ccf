#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "topicbench/api.hpp"
#include "topicbench/distributions.hpp"
#include "topicbench/error.hpp"
#include "topicbench/ingest.hpp"
#include "topicbench/metrics.hpp"
#include "topicbench/models.hpp"
#include "topicbench/preprocess.hpp"
#include "topicbench/stats.hpp"
#include "topicbench/workbench.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;
using namespace topicbench;

namespace {

// Values cross the boundary as plain Python data through the json module;
// NaN leaves C++ as null.
json to_json(const py::handle& obj) {
    return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_py(const json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

template <typename T>
T from_py(const py::handle& obj) {
    return to_json(obj).get<T>();
}

std::vector<preprocess::TokenSet> token_sets(const py::handle& obj) {
    return from_py<std::vector<preprocess::TokenSet>>(obj);
}

std::vector<std::vector<double>> groups_of(const py::handle& obj) {
    return obj.cast<std::vector<std::vector<double>>>();
}

py::object result(const stats::StatTestResult& r) {
    return to_py(json(r));
}

}  // namespace

PYBIND11_MODULE(_topicbench, m) {
    m.doc() = "Topic model comparison workbench: ingest, preprocess, train, evaluate, compare";

    py::register_exception<Error>(m, "Error");
    py::register_exception<IngestError>(m, "IngestError", m.attr("Error"));
    py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error"));
    py::register_exception<ValidationError>(m, "ValidationError", m.attr("Error"));
    py::register_exception<NotFoundError>(m, "NotFoundError", m.attr("Error"));
    py::register_exception<PipelineError>(m, "PipelineError", m.attr("Error"));

    // ingest
    m.def(
        "load_threads",
        [](const fs::path& submissions, const fs::path& comments) {
            ingest::LoadReport report;
            const auto merged = ingest::load_threads(submissions, comments, &report);
            json rep = {{"submissions", report.submissions},       {"comments", report.comments},
                        {"invalid_records", report.invalid_records}, {"malformed_lines", report.malformed_lines},
                        {"orphan_comments", report.orphan_comments}};
            return py::make_tuple(to_py(json(merged.threads)), to_py(rep));
        },
        py::arg("submissions"), py::arg("comments"),
        "Merge an RS_/RC_ dump pair; returns (threads, load report).");
    m.def(
        "read_threads", [](const fs::path& path) { return to_py(json(ingest::read_threads_json(path))); },
        py::arg("path"));
    m.def(
        "write_threads",
        [](const fs::path& path, const py::object& threads) {
            ingest::write_threads_json(path, from_py<std::vector<ingest::Thread>>(threads));
        },
        py::arg("path"), py::arg("threads"));

    // preprocess
    m.def(
        "preprocess",
        [](const py::object& threads, const py::object& config, const std::string& path) {
            const auto cfg = config.is_none() ? preprocess::PreprocessConfig{}
                                              : from_py<preprocess::PreprocessConfig>(config);
            const auto p = path == "embed" ? preprocess::ModelPath::Embedding : preprocess::ModelPath::BagOfWords;
            if (path != "bow" && path != "embed") throw ConfigError("path must be \"bow\" or \"embed\"");
            return to_py(json(preprocess::run_pipeline(from_py<std::vector<ingest::Thread>>(threads), cfg, p)));
        },
        py::arg("threads"), py::arg("config") = py::none(), py::arg("path") = "bow",
        "Token sets for the bag-of-words (\"bow\") or embedding (\"embed\") path.");

    // models
    m.def(
        "train",
        [](const std::string& method, const py::object& tokens, const py::object& config, std::uint64_t seed,
           const std::string& strategy, const std::vector<int>& grid, int runs, const py::object& embedder) {
            workbench::TrainingSpec spec;
            spec.method = models::parse_method(method);
            spec.config = config.is_none() ? json::object() : to_json(config);
            spec.embedder = embedder.is_none() ? json::object() : to_json(embedder);
            spec.seed = seed;
            spec.selection = workbench::default_selection(spec.method);
            spec.selection.strategy = strategy;
            if (!grid.empty()) spec.selection.grid = grid;
            spec.selection.runs = runs;
            auto outcome = workbench::train_with_selection(spec, token_sets(tokens), method);
            json model = outcome.model;
            model["runtime_seconds"] = outcome.model.runtime_seconds;
            return py::make_tuple(to_py(model), to_py(outcome.selection), to_py(outcome.seeds));
        },
        py::arg("method"), py::arg("tokens"), py::arg("config") = py::none(), py::arg("seed") = 42,
        py::arg("strategy") = "fixed", py::arg("grid") = std::vector<int>{}, py::arg("runs") = 11,
        py::arg("embedder") = py::none(),
        "Train lda, nmf or embed. strategy is fixed, sweep (LDA/NMF) or median (EMBED). Returns "
        "(model, selection, seeds).");

    // metrics
    m.def(
        "evaluate",
        [](const py::object& model, const std::string& dataset, const py::object& reference,
           const py::object& held_out) {
            const auto ref = token_sets(reference);
            const auto held = held_out.is_none() ? ref : token_sets(held_out);
            const auto r = from_py<models::TopicModelResult>(model);
            auto report = metrics::evaluate(r, dataset, ref, held);
            report.method = std::string(models::method_name(r.method));
            return to_py(json(report));
        },
        py::arg("model"), py::arg("dataset"), py::arg("reference"), py::arg("held_out") = py::none());
    m.def(
        "coherence",
        [](const std::vector<std::vector<std::string>>& topics, const py::object& reference, std::size_t top_k,
           std::size_t window) {
            metrics::CoherenceOptions o;
            o.top_k = top_k;
            o.window = window;
            return metrics::topic_coherence(topics, token_sets(reference), o);
        },
        py::arg("topics"), py::arg("reference"), py::arg("top_k") = 10, py::arg("window") = 110, "C_v coherence.");
    m.def(
        "diversity",
        [](const std::vector<std::vector<std::string>>& topics, std::size_t top_k) {
            return metrics::topic_diversity(topics, top_k);
        },
        py::arg("topics"), py::arg("top_k") = 10);

    // stats
    m.def("anova", [](const py::object& g) { return result(stats::one_way_anova(groups_of(g))); }, py::arg("groups"));
    m.def(
        "tukey_hsd",
        [](const py::object& g, const std::vector<std::string>& labels, double alpha) {
            return result(stats::tukey_hsd(groups_of(g), labels, alpha));
        },
        py::arg("groups"), py::arg("labels") = std::vector<std::string>{}, py::arg("alpha") = 0.05);
    m.def(
        "paired_t",
        [](const std::vector<double>& x, const std::vector<double>& y) { return result(stats::paired_t(x, y)); },
        py::arg("x"), py::arg("y"));
    m.def(
        "wilcoxon",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            return result(stats::wilcoxon_signed_rank(x, y));
        },
        py::arg("x"), py::arg("y"));
    m.def(
        "pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) { return result(stats::pearson(x, y)); },
        py::arg("x"), py::arg("y"));
    m.def("friedman", [](const py::object& t) { return result(stats::friedman(groups_of(t))); }, py::arg("table"));
    m.def(
        "nemenyi",
        [](const py::object& t, const std::vector<std::string>& labels, double alpha) {
            return result(stats::nemenyi(groups_of(t), labels, alpha));
        },
        py::arg("table"), py::arg("labels") = std::vector<std::string>{}, py::arg("alpha") = 0.05);
    m.def("studentized_range_sf", &stats::studentized_range_sf, py::arg("q"), py::arg("groups"), py::arg("df"));
    m.def(
        "compare_table",
        [](const std::string& csv, const std::string& metric) {
            return to_py(stats::compare_metric_table(stats::parse_metric_table_csv(csv, metric)));
        },
        py::arg("csv"), py::arg("metric") = "", "ANOVA and Tukey HSD over a metric table CSV.");

    // workbench
    m.def(
        "chord_graph",
        [](const py::object& model, double threshold) {
            return to_py(json(workbench::chord_graph(from_py<models::TopicModelResult>(model), threshold)));
        },
        py::arg("model"), py::arg("threshold") = workbench::kDefaultMembershipThreshold);
    m.def("config_hash", [](const py::object& config) { return workbench::config_hash(to_json(config)); },
          py::arg("config"));
    m.def(
        "run_pipeline",
        [](const fs::path& workspace, const py::object& config, const fs::path& base_dir) {
            workbench::Workspace ws(workspace);
            return to_py(json(workbench::run_pipeline(ws, to_json(config), base_dir)));
        },
        py::arg("workspace"), py::arg("config"), py::arg("base_dir") = fs::path{},
        "Run every configured stage into `workspace`; returns the run manifest.");
    m.def(
        "verify_run",
        [](const fs::path& workspace, const std::string& run_id) {
            return workbench::Workspace(workspace).verify(run_id);
        },
        py::arg("workspace"), py::arg("run_id"));
    m.def(
        "export_report",
        [](const fs::path& workspace, const std::string& run_id, double threshold) {
            const auto bundle = workbench::export_report(workbench::Workspace(workspace), run_id, threshold);
            py::dict out;
            out["directory"] = bundle.directory;
            out["metric_tables"] = bundle.metric_tables;
            out["stats"] = bundle.stats;
            out["chords"] = bundle.chords;
            return out;
        },
        py::arg("workspace"), py::arg("run_id"), py::arg("threshold") = workbench::kDefaultMembershipThreshold);

    // HTTP API on a background thread; the workspace lives as long as the server.
    struct PyServer {
        PyServer(const fs::path& root, const std::string& host, int port)
            : workspace(root), server(workspace, api::ServerOptions{host, port, {}}) {}
        workbench::Workspace workspace;
        api::Server server;
    };
    py::class_<PyServer>(m, "Server")
        .def(py::init<const fs::path&, const std::string&, int>(), py::arg("workspace"),
             py::arg("host") = "127.0.0.1", py::arg("port") = 0)
        .def("start", [](PyServer& s) { return s.server.start(); }, "Bind and serve; returns the port.")
        .def("stop", [](PyServer& s) { s.server.stop(); }, py::call_guard<py::gil_scoped_release>())
        .def_property_readonly("port", [](const PyServer& s) { return s.server.port(); });
}
