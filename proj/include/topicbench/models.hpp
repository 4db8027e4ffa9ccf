#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "topicbench/preprocess.hpp"

namespace topicbench::models {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// Corpus representations

/// Dense ids 0..V-1 assigned in lexicographic token order.
class Vocabulary {
public:
    Vocabulary() = default;

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::optional<std::size_t> id(const std::string& token) const;
    std::size_t document_frequency(std::size_t id) const { return df_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    friend Vocabulary build_vocabulary(const std::vector<preprocess::TokenSet>& token_sets);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, std::size_t> ids_;
    std::vector<std::size_t> df_;
};

/// Throws ValidationError("empty corpus") when no token set has tokens.
Vocabulary build_vocabulary(const std::vector<preprocess::TokenSet>& token_sets);

struct BowCorpus {
    std::vector<std::string> doc_ids;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> docs;  // sorted (token id, count >= 1)
    std::size_t vocab_size = 0;

    std::size_t num_docs() const noexcept { return docs.size(); }
    std::size_t num_tokens() const;
};

/// Tokens missing from `vocab` are skipped.
BowCorpus to_bow(const std::vector<preprocess::TokenSet>& token_sets, const Vocabulary& vocab);

/// Document x vocabulary TF-IDF: raw counts, idf = ln((1+N)/(1+df)) + 1,
/// rows L2-normalised.
SparseMatrix tfidf_matrix(const BowCorpus& corpus);

// ---------------------------------------------------------------------------
// Results

enum class Method { Lda, Nmf, Embed };

std::string_view method_name(Method m);           // "LDA", "NMF", "EMBED"
std::string_view method_slug(Method m);           // "lda", "nmf", "embed"
Method parse_method(std::string_view name);       // case-insensitive; "bertopic" = EMBED

inline constexpr int kOutlier = -1;

struct Keyword {
    std::string word;
    double weight = 0.0;

    friend bool operator==(const Keyword&, const Keyword&) = default;
};

struct Topic {
    int id = 0;
    std::vector<Keyword> keywords;  // descending weight
    std::size_t size = 0;           // documents assigned (argmax or hard label)

    friend bool operator==(const Topic&, const Topic&) = default;
};

/// Immutable output of one trainer. LDA/NMF fill doc_topic; EMBED fills
/// labels and probabilities. topic_word rows are phi (LDA), H (NMF) or
/// c-TF-IDF weights (EMBED) over `vocabulary`.
struct TopicModelResult {
    Method method = Method::Lda;
    std::vector<Topic> topics;
    std::vector<std::string> doc_ids;
    Eigen::MatrixXd doc_topic;
    std::vector<int> labels;
    std::vector<double> probabilities;
    std::vector<std::string> vocabulary;
    Eigen::MatrixXd topic_word;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    nlohmann::json diagnostics = nlohmann::json::object();
    double runtime_seconds = 0.0;  // not persisted; ignored by operator==

    std::size_t num_topics() const noexcept { return topics.size(); }
    std::size_t num_docs() const noexcept { return doc_ids.size(); }
    bool soft() const noexcept { return method != Method::Embed; }

    /// Topic membership of document `d`, summing to 1 (soft models) or a
    /// one-hot row; all zeros for an outlier.
    Eigen::VectorXd membership(std::size_t d) const;

    /// Throws ValidationError on shape or simplex violations.
    void validate() const;

    friend bool operator==(const TopicModelResult& a, const TopicModelResult& b);
};

void to_json(nlohmann::json& j, const TopicModelResult& r);
void from_json(const nlohmann::json& j, TopicModelResult& r);

void write_model(const std::filesystem::path& path, const TopicModelResult& r);
TopicModelResult read_model(const std::filesystem::path& path);

/// Top `k` (word, weight) pairs of a weight row, descending; ties by word.
std::vector<Keyword> top_keywords(const Eigen::Ref<const Eigen::VectorXd>& row,
                                  const std::vector<std::string>& vocabulary, std::size_t k);

// ---------------------------------------------------------------------------
// LDA

struct LdaConfig {
    int num_topics = 10;
    std::optional<double> alpha;  // symmetric; default 1/K
    bool eta_auto = true;         // learn an asymmetric eta; `eta` is the start value
    std::optional<double> eta;    // default 1/K
    int passes = 10;
    int sweeps_per_pass = 10;
    int eta_update_interval = 10;  // sweeps between eta fixed-point updates
    int workers = default_workers();
    std::uint64_t seed = 42;
    int top_k = 10;

    void validate() const;
    static int default_workers();
};

void to_json(nlohmann::json& j, const LdaConfig& c);
void from_json(const nlohmann::json& j, LdaConfig& c);

/// Collapsed Gibbs sampling. With workers > 1 documents are split into that
/// many shards sampled concurrently against a per-sweep snapshot of the
/// topic-word counts (approximate distributed sampling); the result is
/// deterministic for a fixed (seed, workers).
TopicModelResult train_lda(const BowCorpus& corpus, const std::vector<std::string>& vocabulary,
                           const LdaConfig& config);

// ---------------------------------------------------------------------------
// NMF

struct NmfConfig {
    int num_topics = 10;
    int max_iter = 200;
    double tol = 1e-4;
    std::uint64_t seed = 42;
    int top_k = 10;

    void validate() const;
};

void to_json(nlohmann::json& j, const NmfConfig& c);
void from_json(const nlohmann::json& j, NmfConfig& c);

struct NmfFactors {
    Eigen::MatrixXd W;  // docs x K
    Eigen::MatrixXd H;  // K x vocab
    std::vector<double> objective;  // 0.5 * ||X - WH||_F^2, index 0 = initial
    int iterations = 0;
    bool converged = false;
};

/// Multiplicative updates on the Frobenius loss from a seeded uniform
/// initialisation scaled by sqrt(mean(X) / K).
NmfFactors factorize_nmf(const SparseMatrix& X, const NmfConfig& config);

TopicModelResult train_nmf(const SparseMatrix& X, const std::vector<std::string>& vocabulary,
                           const std::vector<std::string>& doc_ids, const NmfConfig& config);

// ---------------------------------------------------------------------------
// Class-based TF-IDF

/// weight(w, c) = tf(w, c) * ln(1 + A / f(w)), A = mean words per class,
/// f(w) = total count of w. Throws ValidationError on negative entries or an
/// all-zero matrix.
Eigen::MatrixXd compute_ctfidf(const Eigen::MatrixXd& class_term_counts);

}  // namespace topicbench::models
