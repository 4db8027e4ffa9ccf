#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "topicbench/ingest.hpp"

namespace topicbench::preprocess {

struct TokenSet {
    std::string thread_id;
    std::vector<std::string> tokens;

    friend bool operator==(const TokenSet&, const TokenSet&) = default;
};

void to_json(nlohmann::json& j, const TokenSet& t);
void from_json(const nlohmann::json& j, TokenSet& t);

enum class Pos { Noun, Adj, Verb, Adv, Pron, Det, Adp, Conj, Num, Part, Intj, Other };

std::string_view pos_name(Pos p);
Pos parse_pos(std::string_view name);

struct PreprocessConfig {
    int min_token_len = 2;
    int max_token_len = 15;
    int bigram_min_count = 5;
    double bigram_threshold = 10.0;
    std::set<Pos> allowed_pos{Pos::Noun, Pos::Adj, Pos::Verb, Pos::Adv};
    std::map<std::string, std::string> acronym_map = default_acronyms();
    std::set<std::string> extra_stopwords;
    std::optional<double> tfidf_filter_quantile;  // nullopt = disabled
    std::string lemmatizer = "rules";
    std::filesystem::path lemma_dictionary;  // for the "dictionary" backend

    /// Throws ConfigError when length bounds or the quantile are out of range.
    void validate() const;

    static std::map<std::string, std::string> default_acronyms();
};

void to_json(nlohmann::json& j, const PreprocessConfig& c);
void from_json(const nlohmann::json& j, PreprocessConfig& c);

/// Maps Cyrillic lookalikes to Latin, removes curly quotes, markup tags,
/// HTML entities and URLs.
std::string normalize_text(std::string_view text);

/// Lowercase alphabetic runs within the configured length bounds. Latin-1
/// accented letters are folded to ASCII; every other character separates.
std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& config = {});

/// NLTK English stopwords plus the platform list; "removed" and "deleted"
/// are always included.
const std::set<std::string>& default_stopwords();
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const PreprocessConfig& config = {});

/// (count(ab) - min_count) * V / (count(a) * count(b)).
double bigram_score(std::size_t count_ab, std::size_t count_a, std::size_t count_b, std::size_t vocab_size,
                    int min_count);

struct BigramModel {
    std::map<std::string, std::size_t> unigram_counts;
    std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
    std::size_t vocab_size = 0;  // distinct unigrams + distinct adjacent pairs
    int min_count = 5;
    double threshold = 10.0;

    double score(const std::string& a, const std::string& b) const;
    /// Greedy left-to-right promotion of qualifying adjacent pairs.
    std::vector<std::string> apply(const std::vector<std::string>& tokens) const;
};

BigramModel learn_bigrams(const std::vector<TokenSet>& token_sets, const PreprocessConfig& config = {});
std::vector<TokenSet> detect_bigrams(const std::vector<TokenSet>& token_sets, const PreprocessConfig& config = {});

struct Analysis {
    std::string lemma;
    Pos pos = Pos::Noun;
};

/// Lemma + coarse POS for a lowercase token.
class Lemmatizer {
public:
    virtual ~Lemmatizer() = default;
    virtual Analysis analyze(const std::string& token) const = 0;
    virtual std::string name() const = 0;
};

/// Lookup table backend; unknown forms are kept unchanged and tagged NOUN.
class DictionaryLemmatizer : public Lemmatizer {
public:
    DictionaryLemmatizer() = default;
    explicit DictionaryLemmatizer(std::map<std::string, Analysis> entries);
    /// Tab-separated `form<TAB>lemma<TAB>POS` lines; '#' starts a comment.
    static DictionaryLemmatizer from_file(const std::filesystem::path& path);

    void add(std::string form, std::string lemma, Pos pos);
    std::optional<Analysis> lookup(const std::string& token) const;
    Analysis analyze(const std::string& token) const override;
    std::string name() const override { return "dictionary"; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::map<std::string, Analysis> entries_;
};

/// Built-in English backend: closed-class word lists, irregular forms and
/// suffix rules.
class RuleLemmatizer : public Lemmatizer {
public:
    RuleLemmatizer();
    Analysis analyze(const std::string& token) const override;
    std::string name() const override { return "rules"; }

private:
    DictionaryLemmatizer exceptions_;
};

/// Backend by name ("rules", "dictionary"); anything else throws
/// PipelineError for the lemmatize stage.
std::unique_ptr<Lemmatizer> make_lemmatizer(const PreprocessConfig& config);

std::vector<std::string> lemmatize(const std::vector<std::string>& tokens, const Lemmatizer& lemmatizer,
                                   const PreprocessConfig& config = {});

std::vector<std::string> expand_acronyms(const std::vector<std::string>& tokens,
                                         const std::map<std::string, std::string>& map);

/// Drops single-character and all-digit tokens.
std::vector<std::string> final_cleanup(const std::vector<std::string>& tokens);

/// Per-token maximum of the smooth-idf, L2-normalised TF-IDF weight.
std::map<std::string, double> max_tfidf_weights(const std::vector<TokenSet>& token_sets);

/// Linear-interpolated quantile of `values` (need not be sorted).
double quantile(std::vector<double> values, double q);

/// Removes, corpus-wide, tokens whose maximum TF-IDF weight is below the
/// `q` quantile of all token maxima.
std::vector<TokenSet> tfidf_filter(const std::vector<TokenSet>& token_sets, double q);

enum class ModelPath { BagOfWords, Embedding };

struct PipelineStats {
    std::size_t documents = 0;
    std::size_t tokens_after_cleanup = 0;
    std::size_t tokens_after_filter = 0;
    std::size_t bigrams_promoted = 0;
    bool tfidf_filter_applied = false;
};

/// normalize -> tokenize -> stopwords -> bigrams -> lemmatize -> acronyms ->
/// cleanup -> optional tfidf_filter (never on the embedding path).
std::vector<TokenSet> run_pipeline(const std::vector<ingest::Thread>& threads, const PreprocessConfig& config,
                                   ModelPath path = ModelPath::BagOfWords, PipelineStats* stats = nullptr);

void write_token_sets(const std::filesystem::path& path, const std::vector<TokenSet>& sets);
std::vector<TokenSet> read_token_sets(const std::filesystem::path& path);

}  // namespace topicbench::preprocess
