#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

#include "desirability_words.hpp"
#include "topicbench/error.hpp"
#include "topicbench/stats.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

void to_json(json& j, const RankingRecord& r) {
    j = {{"dataset", r.dataset}, {"reviewer", r.reviewer}, {"ordering", r.ordering},
         {"words", r.words},     {"notes", r.notes},       {"timestamp", r.timestamp}};
}

void from_json(const json& j, RankingRecord& r) {
    r = RankingRecord{};
    r.dataset = j.at("dataset").get<std::string>();
    r.reviewer = j.at("reviewer").get<std::string>();
    r.ordering = j.at("ordering").get<std::vector<std::string>>();
    r.words = j.value("words", std::map<std::string, std::vector<std::string>>{});
    r.notes = j.value("notes", "");
    r.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const FieldError& e) { j = {{"field", e.field}, {"message", e.message}}; }

const std::vector<std::string>& default_desirability_words() {
    static const std::vector<std::string> words = json::parse(kDesirabilityWordsJson).get<std::vector<std::string>>();
    return words;
}

namespace {

std::optional<std::string> canonical_method(const json& v) {
    if (!v.is_string()) return std::nullopt;
    try {
        return std::string(models::method_name(models::parse_method(v.get<std::string>())));
    } catch (const ConfigError&) {
        return std::nullopt;
    }
}

bool non_empty_string(const json& body, const char* key) {
    return body.contains(key) && body[key].is_string() && !body[key].get<std::string>().empty();
}

}  // namespace

std::vector<FieldError> validate_ranking(const json& body, const std::vector<std::string>& available_methods,
                                         const std::set<std::string>& word_list, RankingRecord& out) {
    std::vector<FieldError> errors;
    if (!body.is_object()) return {{"body", "must be a JSON object"}};
    RankingRecord r;

    for (const char* key : {"dataset", "reviewer"}) {
        if (!non_empty_string(body, key)) errors.push_back({key, "must be a non-empty string"});
    }
    if (errors.empty()) {
        r.dataset = body["dataset"].get<std::string>();
        r.reviewer = body["reviewer"].get<std::string>();
    }

    const std::set<std::string> available(available_methods.begin(), available_methods.end());
    if (!body.contains("ordering") || !body["ordering"].is_array()) {
        errors.push_back({"ordering", "must be an array of method names"});
    } else {
        bool ok = true;
        for (const auto& v : body["ordering"]) {
            const auto m = canonical_method(v);
            if (!m) {
                errors.push_back({"ordering", "unknown method " + v.dump()});
                ok = false;
                continue;
            }
            r.ordering.push_back(*m);
        }
        const std::set<std::string> seen(r.ordering.begin(), r.ordering.end());
        if (ok && (seen != available || r.ordering.size() != available.size())) {
            std::string expected;
            for (const auto& m : available_methods) expected += (expected.empty() ? "" : ", ") + m;
            errors.push_back({"ordering", "must be a permutation of " + expected});
        }
    }

    if (body.contains("words")) {
        if (!body["words"].is_object()) {
            errors.push_back({"words", "must map method names to word lists"});
        } else {
            for (const auto& [key, picks] : body["words"].items()) {
                const std::string field = "words." + key;
                const auto m = canonical_method(json(key));
                if (!m || !available.count(*m)) {
                    errors.push_back({field, "not an available method"});
                    continue;
                }
                if (!picks.is_array() || !std::all_of(picks.begin(), picks.end(),
                                                      [](const json& w) { return w.is_string(); })) {
                    errors.push_back({field, "must be an array of words"});
                    continue;
                }
                auto words = picks.get<std::vector<std::string>>();
                if (words.size() > kMaxDesirabilityWords)
                    errors.push_back({field, "at most " + std::to_string(kMaxDesirabilityWords) + " words, got " +
                                                 std::to_string(words.size())});
                std::set<std::string> distinct;
                for (const auto& w : words) {
                    if (!word_list.count(w)) errors.push_back({field, "\"" + w + "\" is not in the word list"});
                    if (!distinct.insert(w).second) errors.push_back({field, "\"" + w + "\" picked twice"});
                }
                if (r.words.count(*m)) errors.push_back({field, "method given twice"});
                r.words[*m] = std::move(words);
            }
        }
    }

    if (body.contains("notes")) {
        if (body["notes"].is_string()) r.notes = body["notes"].get<std::string>();
        else errors.push_back({"notes", "must be a string"});
    }
    if (body.contains("timestamp")) {
        if (non_empty_string(body, "timestamp")) r.timestamp = body["timestamp"].get<std::string>();
        else errors.push_back({"timestamp", "must be a non-empty string"});
    } else {
        r.timestamp = utc_timestamp();
    }

    if (errors.empty()) out = std::move(r);
    return errors;
}

RankingStore::RankingStore(fs::path path) : path_(std::move(path)) {}

void RankingStore::append(const RankingRecord& record) {
    const std::string line = json(record).dump() + "\n";
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << line;
    out.flush();
    if (!out) throw Error("rankings: cannot append to " + path_.string());
}

std::vector<RankingRecord> RankingStore::list(const std::string& dataset) const {
    std::lock_guard lock(mutex_);
    std::vector<RankingRecord> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto r = json::parse(line).get<RankingRecord>();
            if (dataset.empty() || r.dataset == dataset) out.push_back(std::move(r));
        } catch (const std::exception& e) {
            // A torn trailing line from an interrupted append is skipped, not fatal.
            spdlog::warn("rankings: skipping line {} of {}: {}", lineno, path_.string(), e.what());
        }
    }
    return out;
}

json ranking_statistics(const std::vector<RankingRecord>& records, const std::vector<std::string>& methods) {
    std::vector<std::vector<double>> table;
    for (const auto& r : records) {
        if (r.ordering.size() != methods.size()) continue;
        std::vector<double> row;
        for (const auto& m : methods) {
            const auto it = std::find(r.ordering.begin(), r.ordering.end(), m);
            if (it == r.ordering.end()) break;
            row.push_back(static_cast<double>(it - r.ordering.begin() + 1));
        }
        if (row.size() == methods.size()) table.push_back(std::move(row));
    }
    json out = {{"methods", methods}, {"blocks", table.size()}};

    std::map<std::string, std::map<std::string, std::size_t>> word_counts;
    for (const auto& r : records)
        for (const auto& [m, words] : r.words)
            for (const auto& w : words) ++word_counts[m][w];
    out["word_counts"] = word_counts;

    if (table.size() < 2 || methods.size() < 2) {
        out["friedman"] = nullptr;
        out["nemenyi"] = nullptr;
        out["note"] = "need at least two complete rankings";
        return out;
    }
    try {
        out["friedman"] = stats::friedman(table);
        out["nemenyi"] = stats::nemenyi(table, methods);
    } catch (const ValidationError& e) {
        out["friedman"] = nullptr;
        out["nemenyi"] = nullptr;
        out["note"] = e.what();
    }
    return out;
}

}  // namespace topicbench::workbench
