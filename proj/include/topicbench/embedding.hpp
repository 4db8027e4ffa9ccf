#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "topicbench/models.hpp"

namespace topicbench::models {

// ---------------------------------------------------------------------------
// Embedders

/// Maps texts to fixed-dimension rows.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Eigen::MatrixXd embed(const std::vector<std::string>& texts) const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic backend: each whitespace token gets a seeded Gaussian
/// vector; a text is the L2-normalised count-weighted sum.
class RandomProjectionEmbedder : public Embedder {
public:
    explicit RandomProjectionEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0);
    Eigen::MatrixXd embed(const std::vector<std::string>& texts) const override;
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "random_projection"; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Sentence-embedding service speaking the OpenAI-style
/// `POST {"model", "input": [...]}` -> `{"data": [{"embedding": [...]}]}`.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::string url, std::string model, std::size_t dimension, std::size_t batch_size = 64);
    Eigen::MatrixXd embed(const std::vector<std::string>& texts) const override;
    std::size_t dimension() const override { return dim_; }
    std::string name() const override { return "http"; }

private:
    std::string url_;
    std::string model_;
    std::size_t dim_;
    std::size_t batch_;
};

/// {"backend": "random_projection", "dimension": 64, "seed": 0} or
/// {"backend": "http", "url": ..., "model": ..., "dimension": N}.
std::unique_ptr<Embedder> make_embedder(const nlohmann::json& config);

// ---------------------------------------------------------------------------
// Manifold reduction

enum class Metric { Euclidean, Cosine };

Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);

struct KnnGraph {
    std::vector<std::vector<int>> indices;      // excludes the point itself
    std::vector<std::vector<double>> distances;  // ascending
};

/// Exact k nearest neighbours (ties by index).
KnnGraph exact_knn(const Eigen::MatrixXd& X, int k, Metric metric);

struct UmapConfig {
    int n_neighbors = 15;
    int n_components = 5;
    double min_dist = 0.0;
    double spread = 1.0;
    Metric metric = Metric::Cosine;
    int n_epochs = 0;  // 0 = 500 below 10000 rows, else 200
    double learning_rate = 1.0;
    int negative_sample_rate = 5;
    std::uint64_t seed = 42;
};

/// Curve parameters of 1 / (1 + a d^(2b)) fitted to the min_dist/spread
/// target by Gauss-Newton.
std::pair<double, double> fit_ab(double spread, double min_dist);

/// Fuzzy simplicial set of the kNN graph (symmetric, weights in (0, 1]).
struct FuzzyGraph {
    std::vector<int> head;
    std::vector<int> tail;
    std::vector<double> weight;
};

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, std::size_t n_points);

/// UMAP-style embedding: fuzzy kNN graph, seeded uniform initialisation,
/// SGD with negative sampling.
Eigen::MatrixXd umap_reduce(const Eigen::MatrixXd& X, const UmapConfig& config);

// ---------------------------------------------------------------------------
// Density clustering

struct HdbscanConfig {
    int min_cluster_size = 15;
    int min_samples = 0;  // 0 = min_cluster_size
    Metric metric = Metric::Euclidean;
    bool leaf_selection = false;  // false = excess of mass
    bool allow_single_cluster = false;
};

struct HdbscanResult {
    std::vector<int> labels;  // -1 = noise
    std::vector<double> probabilities;
    int num_clusters = 0;
};

HdbscanResult hdbscan(const Eigen::MatrixXd& X, const HdbscanConfig& config);

// ---------------------------------------------------------------------------
// Embedding + clustering trainer

struct EmbedClusterConfig {
    int n_neighbors = 15;
    int n_components = 5;
    double min_dist = 0.0;
    std::string reduction_metric = "cosine";
    int min_cluster_size = 15;
    std::string cluster_metric = "euclidean";
    std::string selection = "eom";
    std::string nr_topics = "auto";  // "auto", "none" or an integer cap
    double merge_threshold = 0.85;
    int top_k_words = 10;
    std::uint64_t seed = 42;

    void validate(std::size_t embedding_dimension) const;
};

void to_json(nlohmann::json& j, const EmbedClusterConfig& c);
void from_json(const nlohmann::json& j, EmbedClusterConfig& c);

/// Repeatedly merges the most similar pair of topics (c-TF-IDF cosine >=
/// threshold) until none qualifies, or while more than `max_topics` remain
/// when it is positive. `labels` use -1 for outliers; the result is
/// relabelled 0..K-1 by descending size.
std::vector<int> merge_similar_topics(const std::vector<int>& labels, const SparseMatrix& doc_term_counts,
                                      double threshold, int max_topics = 0);

/// Summed term counts per class; row 0 holds the outliers, row t + 1 topic t.
Eigen::MatrixXd class_term_counts(const std::vector<int>& labels, const SparseMatrix& doc_term_counts,
                                  int num_topics);

/// embed -> reduce -> cluster -> c-TF-IDF keywords -> auto merge.
/// `texts[i]` is the space-joined token set of `doc_ids[i]`.
TopicModelResult train_embed_cluster(const std::vector<std::string>& doc_ids, const std::vector<std::string>& texts,
                                     const EmbedClusterConfig& config, const Embedder& embedder);

}  // namespace topicbench::models
