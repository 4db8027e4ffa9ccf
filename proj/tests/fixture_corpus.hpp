#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicbench/ingest.hpp"

namespace testing {

// Three disjoint themes; every document draws almost all of its words from
// one theme, so each method should find them. Themes are shorter than the
// coherence top-k, so a model that merges two themes must mix them in its
// keyword list and loses coherence.
inline const std::vector<std::vector<std::string>>& fixture_themes() {
    static const std::vector<std::vector<std::string>> themes{
        {"rocket", "orbit", "planet", "telescope", "galaxy", "astronaut"},
        {"recipe", "oven", "flour", "butter", "garlic", "onion"},
        {"stock", "market", "dividend", "portfolio", "bond", "equity"},
    };
    return themes;
}

inline std::string fixture_text(std::mt19937& rng, std::size_t theme, std::size_t words) {
    static const std::vector<std::string> filler{"weekend", "friend", "window", "garden"};
    const auto& vocab = fixture_themes()[theme];
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_filler(0, filler.size() - 1);
    std::string text;
    for (std::size_t i = 0; i < words; ++i) text += (i ? " " : "") + vocab[pick(rng)];
    text += " " + filler[pick_filler(rng)];
    return text;
}

inline std::vector<topicbench::ingest::Thread> fixture_threads(std::size_t per_theme = 20, unsigned seed = 11) {
    std::mt19937 rng(seed);
    std::vector<topicbench::ingest::Thread> out;
    for (std::size_t i = 0; i < per_theme * fixture_themes().size(); ++i) {
        const std::size_t theme = i % fixture_themes().size();
        out.push_back({"t" + std::to_string(i), fixture_text(rng, theme, 20), 0});
    }
    return out;
}

// RS_<name>.json.zst / RC_<name>.json.zst in `dir`: one comment per
// submission plus one orphan comment.
inline void write_fixture_dumps(const std::filesystem::path& dir, const std::string& name,
                                std::size_t per_theme = 20, unsigned seed = 23) {
    std::mt19937 rng(seed);
    std::vector<std::string> subs, comments;
    const std::size_t n = per_theme * fixture_themes().size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t theme = i % fixture_themes().size();
        const std::string id = "s" + std::to_string(i);
        subs.push_back(nlohmann::json{{"id", id},
                                      {"title", fixture_text(rng, theme, 6)},
                                      {"selftext", fixture_text(rng, theme, 10)},
                                      {"created_utc", 1600000000 + static_cast<long>(i)},
                                      {"subreddit", name}}
                           .dump());
        comments.push_back(nlohmann::json{{"id", "c" + std::to_string(i)},
                                          {"link_id", "t3_" + id},
                                          {"body", fixture_text(rng, theme, 8)},
                                          {"created_utc", 1600000100 + static_cast<long>(i)}}
                               .dump());
    }
    comments.push_back(
        nlohmann::json{{"id", "orphan"}, {"link_id", "t3_missing"}, {"body", "lost comment"}, {"created_utc", 1600000000}}
            .dump());
    std::filesystem::create_directories(dir);
    topicbench::ingest::write_zstd_ndjson(dir / ("RS_" + name + ".json.zst"), subs);
    topicbench::ingest::write_zstd_ndjson(dir / ("RC_" + name + ".json.zst"), comments);
}

// Two datasets (a threads file and a dump pair), all three methods, small
// selection grids so the whole pipeline runs in seconds.
inline nlohmann::json fixture_config() {
    return {
        {"datasets", {{{"name", "forum"}, {"threads", "forum_threads.json"}}, {{"name", "board"}, {"dumps", "dumps"}}}},
        {"methods", {"lda", "nmf", "embed"}},
        {"lda", {{"passes", 4}}},
        {"embed", {{"min_cluster_size", 8}, {"n_neighbors", 10}}},
        {"selection", {{"lda", {{"grid", {2, 3, 4}}}}, {"nmf", {{"grid", {2, 3, 4}}}}, {"embed", {{"runs", 3}}}}},
        {"seed", 7},
    };
}

// Writes the inputs referenced by fixture_config() into `dir`.
inline void write_fixture_inputs(const std::filesystem::path& dir) {
    topicbench::ingest::write_threads_json(dir / "forum_threads.json", fixture_threads());
    write_fixture_dumps(dir / "dumps", "board");
}

}  // namespace testing
