#include <algorithm>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "io.hpp"
#include "topicbench/error.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

namespace detail {

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const json& value) { write_atomic(path, value.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string relative_to(const fs::path& path, const fs::path& root) {
    return fs::relative(path, root).generic_string();
}

}  // namespace detail

void to_json(json& j, const ArtifactRef& a) {
    j = {{"kind", a.kind}, {"dataset", a.dataset}, {"method", a.method},
         {"path", a.path}, {"sha256", a.sha256},   {"volatile", a.volatile_content}};
}

void from_json(const json& j, ArtifactRef& a) {
    a.kind = j.at("kind").get<std::string>();
    a.dataset = j.value("dataset", "");
    a.method = j.value("method", "");
    a.path = j.at("path").get<std::string>();
    a.sha256 = j.at("sha256").get<std::string>();
    a.volatile_content = j.value("volatile", false);
}

void to_json(json& j, const StageRecord& s) {
    j = {{"name", s.name},
         {"status", s.status},
         {"started_at", s.started_at},
         {"finished_at", s.finished_at},
         {"error", s.error}};
}

void from_json(const json& j, StageRecord& s) {
    s.name = j.at("name").get<std::string>();
    s.status = j.at("status").get<std::string>();
    s.started_at = j.value("started_at", "");
    s.finished_at = j.value("finished_at", "");
    s.error = j.value("error", "");
}

void to_json(json& j, const RunManifest& m) {
    j = {{"run_id", m.run_id},     {"config_hash", m.config_hash},   {"config", m.config},
         {"status", m.status},     {"failed_stage", m.failed_stage}, {"error", m.error},
         {"created_at", m.created_at}, {"finished_at", m.finished_at}, {"stages", m.stages},
         {"artifacts", m.artifacts}, {"seeds", m.seeds}};
}

void from_json(const json& j, RunManifest& m) {
    m.run_id = j.at("run_id").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    m.status = j.at("status").get<std::string>();
    m.failed_stage = j.value("failed_stage", "");
    m.error = j.value("error", "");
    m.created_at = j.value("created_at", "");
    m.finished_at = j.value("finished_at", "");
    m.stages = j.value("stages", std::vector<StageRecord>{});
    m.artifacts = j.value("artifacts", std::vector<ArtifactRef>{});
    m.seeds = j.value("seeds", json::object());
}

bool RunManifest::has_stage(const std::string& name) const {
    return std::any_of(stages.begin(), stages.end(),
                       [&](const StageRecord& s) { return s.name == name && s.status == "ok"; });
}

std::vector<ArtifactRef> RunManifest::artifacts_of(const std::string& kind) const {
    std::vector<ArtifactRef> out;
    std::copy_if(artifacts.begin(), artifacts.end(), std::back_inserter(out),
                 [&](const ArtifactRef& a) { return a.kind == kind; });
    return out;
}

void to_json(json& j, const DatasetEntry& e) {
    j = {{"name", e.name}, {"run_id", e.run_id}, {"threads", e.threads}, {"models", e.models}, {"metrics", e.metrics}};
}

void from_json(const json& j, DatasetEntry& e) {
    e.name = j.at("name").get<std::string>();
    e.run_id = j.at("run_id").get<std::string>();
    e.threads = j.value("threads", "");
    e.models = j.value("models", std::map<std::string, std::string>{});
    e.metrics = j.value("metrics", "");
}

Workspace::Workspace(fs::path root) : root_(std::move(root)), rankings_(root_ / "rankings.jsonl") {
    fs::create_directories(root_ / "runs");
}

fs::path Workspace::run_dir(const std::string& run_id) const { return root_ / "runs" / run_id; }
fs::path Workspace::report_dir(const std::string& run_id) const { return root_ / "reports" / run_id; }

std::vector<std::string> Workspace::run_ids() const {
    std::vector<std::string> ids;
    const fs::path runs = root_ / "runs";
    if (!fs::exists(runs)) return ids;
    for (const auto& entry : fs::directory_iterator(runs))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

RunManifest Workspace::load_manifest(const std::string& run_id) const {
    if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.find("..") != std::string::npos)
        throw NotFoundError("run not found: '" + run_id + "'");
    const fs::path path = run_dir(run_id) / "manifest.json";
    if (!fs::exists(path)) throw NotFoundError("run not found: '" + run_id + "'");
    return detail::read_json_file(path).get<RunManifest>();
}

std::map<std::string, DatasetEntry> Workspace::registry() const {
    std::lock_guard lock(registry_mutex_);
    const fs::path path = root_ / "registry.json";
    if (!fs::exists(path)) return {};
    return detail::read_json_file(path).at("datasets").get<std::map<std::string, DatasetEntry>>();
}

void Workspace::register_run(const RunManifest& manifest) {
    if (manifest.status != "complete") throw ValidationError("only complete runs can be registered");
    std::map<std::string, DatasetEntry> updated;
    for (const auto& a : manifest.artifacts) {
        if (a.dataset.empty()) continue;
        auto& e = updated[a.dataset];
        e.name = a.dataset;
        e.run_id = manifest.run_id;
        if (a.kind == "threads") e.threads = a.path;
        else if (a.kind == "model") e.models[model_id(models::parse_method(a.method), a.dataset)] = a.path;
        else if (a.kind == "metrics") e.metrics = a.path;
    }
    std::lock_guard lock(registry_mutex_);
    const fs::path path = root_ / "registry.json";
    std::map<std::string, DatasetEntry> current;
    if (fs::exists(path)) current = detail::read_json_file(path).at("datasets").get<std::map<std::string, DatasetEntry>>();
    for (auto& [name, e] : updated) current[name] = std::move(e);
    detail::write_json_atomic(root_ / "registry.json", json{{"datasets", current}});
}

std::vector<std::string> Workspace::verify(const std::string& run_id) const {
    std::vector<std::string> problems;
    const RunManifest m = load_manifest(run_id);
    if (config_hash(m.config) != m.config_hash) problems.push_back("config hash does not match the stored config");
    for (const auto& a : m.artifacts) {
        const fs::path p = resolve(a.path);
        if (!fs::exists(p)) {
            problems.push_back("missing artifact " + a.path);
        } else if (file_sha256(p) != a.sha256) {
            problems.push_back("checksum mismatch for " + a.path);
        }
    }
    return problems;
}

std::vector<std::string> Workspace::desirability_words() const {
    const fs::path custom = root_ / "desirability_words.json";
    if (!fs::exists(custom)) return default_desirability_words();
    auto words = detail::read_json_file(custom);
    if (!words.is_array()) throw ConfigError(custom.string() + ": expected an array of words");
    return words.get<std::vector<std::string>>();
}

}  // namespace topicbench::workbench
