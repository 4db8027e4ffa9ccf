#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "topicbench/error.hpp"
#include "topicbench/preprocess.hpp"

namespace topicbench::preprocess {

using nlohmann::json;

void to_json(json& j, const TokenSet& t) {
    j = json{{"thread_id", t.thread_id}, {"tokens", t.tokens}};
}

void from_json(const json& j, TokenSet& t) {
    j.at("thread_id").get_to(t.thread_id);
    j.at("tokens").get_to(t.tokens);
}

void PreprocessConfig::validate() const {
    if (min_token_len < 1 || min_token_len > max_token_len) {
        throw ConfigError("preprocess: require 1 <= min_token_len <= max_token_len");
    }
    if (bigram_min_count < 0) throw ConfigError("preprocess: bigram_min_count must be >= 0");
    if (tfidf_filter_quantile && !(*tfidf_filter_quantile >= 0.0 && *tfidf_filter_quantile <= 1.0)) {
        throw ConfigError("preprocess: tfidf_filter_quantile must lie in [0, 1]");
    }
    for (const auto& [key, value] : acronym_map) {
        if (std::any_of(key.begin(), key.end(), [](unsigned char c) { return std::isupper(c) != 0; })) {
            throw ConfigError("preprocess: acronym keys must be lowercase: " + key);
        }
    }
}

void to_json(json& j, const PreprocessConfig& c) {
    json pos = json::array();
    for (const auto p : c.allowed_pos) pos.push_back(pos_name(p));
    j = json{{"min_token_len", c.min_token_len},
             {"max_token_len", c.max_token_len},
             {"bigram_min_count", c.bigram_min_count},
             {"bigram_threshold", c.bigram_threshold},
             {"allowed_pos", pos},
             {"acronym_map", c.acronym_map},
             {"extra_stopwords", c.extra_stopwords},
             {"tfidf_filter_quantile", c.tfidf_filter_quantile ? json(*c.tfidf_filter_quantile) : json(nullptr)},
             {"lemmatizer", c.lemmatizer},
             {"lemma_dictionary", c.lemma_dictionary.string()}};
}

void from_json(const json& j, PreprocessConfig& c) {
    try {
        c.min_token_len = j.value("min_token_len", c.min_token_len);
        c.max_token_len = j.value("max_token_len", c.max_token_len);
        c.bigram_min_count = j.value("bigram_min_count", c.bigram_min_count);
        c.bigram_threshold = j.value("bigram_threshold", c.bigram_threshold);
        if (j.contains("allowed_pos")) {
            c.allowed_pos.clear();
            for (const auto& p : j.at("allowed_pos")) c.allowed_pos.insert(parse_pos(p.get<std::string>()));
        }
        if (j.contains("acronym_map")) j.at("acronym_map").get_to(c.acronym_map);
        if (j.contains("extra_stopwords")) j.at("extra_stopwords").get_to(c.extra_stopwords);
        if (j.contains("tfidf_filter_quantile")) {
            const auto& q = j.at("tfidf_filter_quantile");
            if (q.is_null() || (q.is_boolean() && !q.get<bool>())) {
                c.tfidf_filter_quantile.reset();
            } else {
                c.tfidf_filter_quantile = q.get<double>();
            }
        }
        c.lemmatizer = j.value("lemmatizer", c.lemmatizer);
        c.lemma_dictionary = j.value("lemma_dictionary", c.lemma_dictionary.string());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("preprocess config: ") + e.what());
    }
    c.validate();
}

// ---------------------------------------------------------------------------
// Bigrams

double bigram_score(std::size_t count_ab, std::size_t count_a, std::size_t count_b, std::size_t vocab_size,
                    int min_count) {
    const double denom = static_cast<double>(count_a) * static_cast<double>(count_b);
    if (denom == 0.0) return -std::numeric_limits<double>::infinity();
    return (static_cast<double>(count_ab) - min_count) * static_cast<double>(vocab_size) / denom;
}

double BigramModel::score(const std::string& a, const std::string& b) const {
    const auto ab = pair_counts.find({a, b});
    if (ab == pair_counts.end()) return -std::numeric_limits<double>::infinity();
    const auto ca = unigram_counts.find(a);
    const auto cb = unigram_counts.find(b);
    if (ca == unigram_counts.end() || cb == unigram_counts.end()) return -std::numeric_limits<double>::infinity();
    return bigram_score(ab->second, ca->second, cb->second, vocab_size, min_count);
}

std::vector<std::string> BigramModel::apply(const std::vector<std::string>& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (i + 1 < tokens.size() && score(tokens[i], tokens[i + 1]) >= threshold) {
            out.push_back(tokens[i] + "_" + tokens[i + 1]);
            i += 2;
        } else {
            out.push_back(tokens[i]);
            ++i;
        }
    }
    return out;
}

BigramModel learn_bigrams(const std::vector<TokenSet>& token_sets, const PreprocessConfig& config) {
    BigramModel m;
    m.min_count = config.bigram_min_count;
    m.threshold = config.bigram_threshold;
    for (const auto& ts : token_sets) {
        for (std::size_t i = 0; i < ts.tokens.size(); ++i) {
            ++m.unigram_counts[ts.tokens[i]];
            if (i + 1 < ts.tokens.size()) ++m.pair_counts[{ts.tokens[i], ts.tokens[i + 1]}];
        }
    }
    m.vocab_size = m.unigram_counts.size() + m.pair_counts.size();
    return m;
}

std::vector<TokenSet> detect_bigrams(const std::vector<TokenSet>& token_sets, const PreprocessConfig& config) {
    const auto model = learn_bigrams(token_sets, config);
    std::vector<TokenSet> out;
    out.reserve(token_sets.size());
    for (const auto& ts : token_sets) out.push_back(TokenSet{ts.thread_id, model.apply(ts.tokens)});
    return out;
}

// ---------------------------------------------------------------------------
// TF-IDF filter

std::map<std::string, double> max_tfidf_weights(const std::vector<TokenSet>& token_sets) {
    const double n_docs = static_cast<double>(token_sets.size());
    std::unordered_map<std::string, std::size_t> df;
    for (const auto& ts : token_sets) {
        std::vector<std::string> uniq = ts.tokens;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (const auto& t : uniq) ++df[t];
    }
    std::map<std::string, double> best;
    for (const auto& ts : token_sets) {
        std::map<std::string, double> tf;
        for (const auto& t : ts.tokens) tf[t] += 1.0;
        double norm2 = 0.0;
        for (auto& [t, w] : tf) {
            w *= std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[t]))) + 1.0;
            norm2 += w * w;
        }
        const double norm = std::sqrt(norm2);
        for (const auto& [t, w] : tf) {
            const double v = norm > 0.0 ? w / norm : 0.0;
            auto [it, inserted] = best.emplace(t, v);
            if (!inserted) it->second = std::max(it->second, v);
        }
    }
    return best;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DegenerateInputError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<TokenSet> tfidf_filter(const std::vector<TokenSet>& token_sets, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("tfidf_filter quantile must lie in [0, 1]");
    const auto maxima = max_tfidf_weights(token_sets);
    if (maxima.empty()) return token_sets;
    std::vector<double> values;
    values.reserve(maxima.size());
    for (const auto& [t, w] : maxima) values.push_back(w);
    const double cut = quantile(values, q);
    std::vector<TokenSet> out;
    out.reserve(token_sets.size());
    for (const auto& ts : token_sets) {
        TokenSet kept{ts.thread_id, {}};
        for (const auto& t : ts.tokens) {
            if (maxima.at(t) >= cut) kept.tokens.push_back(t);
        }
        out.push_back(std::move(kept));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

std::vector<TokenSet> run_pipeline(const std::vector<ingest::Thread>& threads, const PreprocessConfig& config,
                                   ModelPath path, PipelineStats* stats) {
    config.validate();
    const auto lemmatizer = make_lemmatizer(config);

    std::vector<TokenSet> sets;
    sets.reserve(threads.size());
    for (const auto& th : threads) {
        sets.push_back(TokenSet{th.id, remove_stopwords(tokenize(normalize_text(th.text), config), config)});
    }

    const auto bigrams = learn_bigrams(sets, config);
    std::size_t promoted = 0;
    std::size_t total = 0;
    for (auto& ts : sets) {
        auto joined = bigrams.apply(ts.tokens);
        promoted += ts.tokens.size() - joined.size();
        ts.tokens = final_cleanup(expand_acronyms(lemmatize(joined, *lemmatizer, config), config.acronym_map));
        // Expansions may reintroduce platform markers; those never survive.
        std::erase_if(ts.tokens, [](const std::string& t) { return t == "removed" || t == "deleted"; });
        total += ts.tokens.size();
    }

    PipelineStats local;
    local.documents = sets.size();
    local.bigrams_promoted = promoted;
    local.tokens_after_cleanup = total;
    local.tokens_after_filter = total;

    if (config.tfidf_filter_quantile) {
        if (path == ModelPath::Embedding) {
            spdlog::warn("tfidf_filter is configured but skipped on the embedding path");
        } else {
            sets = tfidf_filter(sets, *config.tfidf_filter_quantile);
            local.tfidf_filter_applied = true;
            local.tokens_after_filter = 0;
            for (const auto& ts : sets) local.tokens_after_filter += ts.tokens.size();
        }
    }
    spdlog::info("preprocess: {} documents, {} tokens ({} after filter), {} bigrams promoted", local.documents,
                 local.tokens_after_cleanup, local.tokens_after_filter, local.bigrams_promoted);
    if (stats != nullptr) *stats = local;
    return sets;
}

void write_token_sets(const std::filesystem::path& path, const std::vector<TokenSet>& sets) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write token sets: " + path.string());
    out << json(sets).dump() << '\n';
}

std::vector<TokenSet> read_token_sets(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("token sets not found: " + path.string());
    try {
        return json::parse(in).get<std::vector<TokenSet>>();
    } catch (const json::exception& e) {
        throw ValidationError("malformed token sets " + path.string() + ": " + e.what());
    }
}

}  // namespace topicbench::preprocess
