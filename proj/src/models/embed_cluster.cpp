#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"

namespace topicbench::models {

using nlohmann::json;

namespace {

// 0 for "auto" and "none", else the positive integer cap.
int parse_nr_topics(const std::string& s) {
    if (s == "auto" || s == "none") return 0;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v < 1) {
        throw ConfigError("embed: nr_topics must be \"auto\", \"none\" or a positive integer, got \"" + s + "\"");
    }
    return v;
}

}  // namespace

void EmbedClusterConfig::validate(std::size_t embedding_dimension) const {
    if (n_neighbors < 2) throw ConfigError("embed: n_neighbors must be >= 2");
    if (n_components < 1) throw ConfigError("embed: n_components must be >= 1");
    if (embedding_dimension > 0 && static_cast<std::size_t>(n_components) >= embedding_dimension) {
        throw ConfigError("embed: n_components (" + std::to_string(n_components) +
                          ") must be below the embedding dimension (" + std::to_string(embedding_dimension) + ")");
    }
    if (min_dist < 0.0) throw ConfigError("embed: min_dist must be >= 0");
    if (min_cluster_size < 2) throw ConfigError("embed: min_cluster_size must be >= 2");
    parse_metric(reduction_metric);
    parse_metric(cluster_metric);
    if (selection != "eom" && selection != "leaf") throw ConfigError("embed: selection must be eom or leaf");
    parse_nr_topics(nr_topics);
    if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) {
        throw ConfigError("embed: merge_threshold must lie in (0, 1]");
    }
    if (top_k_words < 1) throw ConfigError("embed: top_k_words must be >= 1");
}

void to_json(json& j, const EmbedClusterConfig& c) {
    j = json{{"n_neighbors", c.n_neighbors},
             {"n_components", c.n_components},
             {"min_dist", c.min_dist},
             {"reduction_metric", c.reduction_metric},
             {"min_cluster_size", c.min_cluster_size},
             {"cluster_metric", c.cluster_metric},
             {"selection", c.selection},
             {"nr_topics", c.nr_topics},
             {"merge_threshold", c.merge_threshold},
             {"top_k_words", c.top_k_words},
             {"seed", c.seed}};
}

void from_json(const json& j, EmbedClusterConfig& c) {
    try {
        c.n_neighbors = j.value("n_neighbors", c.n_neighbors);
        c.n_components = j.value("n_components", c.n_components);
        c.min_dist = j.value("min_dist", c.min_dist);
        c.reduction_metric = j.value("reduction_metric", c.reduction_metric);
        c.min_cluster_size = j.value("min_cluster_size", c.min_cluster_size);
        c.cluster_metric = j.value("cluster_metric", c.cluster_metric);
        c.selection = j.value("selection", c.selection);
        if (j.contains("nr_topics")) {
            const auto& v = j.at("nr_topics");
            c.nr_topics = v.is_number_integer() ? std::to_string(v.get<int>()) : v.get<std::string>();
        }
        c.merge_threshold = j.value("merge_threshold", c.merge_threshold);
        c.top_k_words = j.value("top_k_words", c.top_k_words);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("embed config: ") + e.what());
    }
    c.validate(0);
}

Eigen::MatrixXd class_term_counts(const std::vector<int>& labels, const SparseMatrix& doc_term_counts,
                                  int num_topics) {
    if (static_cast<Eigen::Index>(labels.size()) != doc_term_counts.rows()) {
        throw ValidationError("class_term_counts: label count does not match document count");
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_topics + 1, doc_term_counts.cols());
    for (Eigen::Index d = 0; d < doc_term_counts.outerSize(); ++d) {
        const int l = labels[static_cast<std::size_t>(d)];
        if (l < kOutlier || l >= num_topics) throw ValidationError("class_term_counts: label out of range");
        for (SparseMatrix::InnerIterator it(doc_term_counts, d); it; ++it) out(l + 1, it.col()) += it.value();
    }
    return out;
}

namespace {

// c-TF-IDF rows for topics 0..K-1; the outlier class takes part in the
// weighting only when it has members.
Eigen::MatrixXd topic_ctfidf(const std::vector<int>& labels, const SparseMatrix& X, int K) {
    const Eigen::MatrixXd counts = class_term_counts(labels, X, K);
    const bool has_outliers = std::find(labels.begin(), labels.end(), kOutlier) != labels.end();
    const Eigen::Index first = has_outliers ? 0 : 1;
    const Eigen::MatrixXd used = counts.bottomRows(counts.rows() - first);
    if (used.rows() == 0 || used.sum() <= 0.0) return Eigen::MatrixXd::Zero(K, X.cols());
    return compute_ctfidf(used).bottomRows(K);
}

// Labels 0..K-1 by descending size; ties keep the original order.
std::vector<int> relabel_by_size(const std::vector<int>& labels) {
    std::map<int, std::size_t> sizes;
    for (const int l : labels) {
        if (l != kOutlier) ++sizes[l];
    }
    std::vector<std::pair<int, std::size_t>> order(sizes.begin(), sizes.end());
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::map<int, int> remap;
    for (std::size_t i = 0; i < order.size(); ++i) remap[order[i].first] = static_cast<int>(i);
    std::vector<int> out(labels.size());
    for (std::size_t d = 0; d < labels.size(); ++d) out[d] = labels[d] == kOutlier ? kOutlier : remap[labels[d]];
    return out;
}

}  // namespace

std::vector<int> merge_similar_topics(const std::vector<int>& labels, const SparseMatrix& doc_term_counts,
                                      double threshold, int max_topics) {
    std::vector<int> current = relabel_by_size(labels);
    for (;;) {
        const int K = current.empty() ? 0 : *std::max_element(current.begin(), current.end()) + 1;
        if (K <= 1) break;
        Eigen::MatrixXd w = topic_ctfidf(current, doc_term_counts, K);
        for (Eigen::Index t = 0; t < K; ++t) {
            const double norm = w.row(t).norm();
            if (norm > 0.0) w.row(t) /= norm;
        }
        const Eigen::MatrixXd sim = w * w.transpose();
        int best_a = -1;
        int best_b = -1;
        double best = -1.0;
        for (int a = 0; a < K; ++a) {
            for (int b = a + 1; b < K; ++b) {
                if (sim(a, b) > best) {
                    best = sim(a, b);
                    best_a = a;
                    best_b = b;
                }
            }
        }
        const bool over_cap = max_topics > 0 && K > max_topics;
        if (!over_cap && (max_topics > 0 || best < threshold)) break;
        // Labels are size-ordered, so best_a is the larger topic.
        for (int& l : current) {
            if (l == best_b) l = best_a;
        }
        current = relabel_by_size(current);
    }
    return current;
}

TopicModelResult train_embed_cluster(const std::vector<std::string>& doc_ids, const std::vector<std::string>& texts,
                                     const EmbedClusterConfig& config, const Embedder& embedder) {
    config.validate(embedder.dimension());
    if (texts.empty()) throw ValidationError("embed: no documents");
    if (doc_ids.size() != texts.size()) throw ValidationError("embed: doc_ids and texts differ in length");
    const std::size_t n = texts.size();

    // Whitespace tokens, vocabulary in lexicographic order.
    std::vector<std::vector<std::string>> tokens(n);
    std::map<std::string, int> vocab_ids;
    for (std::size_t d = 0; d < n; ++d) {
        std::istringstream in(texts[d]);
        std::string w;
        while (in >> w) {
            vocab_ids.emplace(w, 0);
            tokens[d].push_back(std::move(w));
        }
    }
    std::vector<std::string> vocabulary;
    vocabulary.reserve(vocab_ids.size());
    for (auto& [w, id] : vocab_ids) {
        id = static_cast<int>(vocabulary.size());
        vocabulary.push_back(w);
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t d = 0; d < n; ++d) {
        for (const auto& w : tokens[d]) triplets.emplace_back(static_cast<int>(d), vocab_ids.at(w), 1.0);
    }
    SparseMatrix counts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(vocabulary.size()));
    counts.setFromTriplets(triplets.begin(), triplets.end());

    TopicModelResult r;
    r.method = Method::Embed;
    r.seed = config.seed;
    r.config = config;
    r.doc_ids = doc_ids;
    r.vocabulary = vocabulary;
    r.labels.assign(n, kOutlier);
    r.probabilities.assign(n, 0.0);
    r.topic_word = Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(vocabulary.size()));

    if (n < static_cast<std::size_t>(config.min_cluster_size)) {
        spdlog::warn("embed: {} documents is below min_cluster_size={}, every document is an outlier", n,
                     config.min_cluster_size);
        r.diagnostics = json{{"embedder", embedder.name()}, {"clusters_found", 0}, {"outliers", n}};
        return r;
    }

    const Eigen::MatrixXd embeddings = embedder.embed(texts);
    if (embeddings.rows() != static_cast<Eigen::Index>(n) ||
        embeddings.cols() != static_cast<Eigen::Index>(embedder.dimension())) {
        throw PipelineError("embed", "embedder returned a matrix of the wrong shape");
    }
    if (!embeddings.allFinite()) throw PipelineError("embed", "embedder returned non-finite values");

    UmapConfig umap;
    umap.n_neighbors = config.n_neighbors;
    umap.n_components = config.n_components;
    umap.min_dist = config.min_dist;
    umap.metric = parse_metric(config.reduction_metric);
    umap.seed = config.seed;
    const Eigen::MatrixXd reduced = umap_reduce(embeddings, umap);

    HdbscanConfig hc;
    hc.min_cluster_size = config.min_cluster_size;
    hc.metric = parse_metric(config.cluster_metric);
    hc.leaf_selection = config.selection == "leaf";
    const auto clusters = hdbscan(reduced, hc);

    const int cap = parse_nr_topics(config.nr_topics);
    std::vector<int> labels;
    if (config.nr_topics == "none") {
        labels = relabel_by_size(clusters.labels);
    } else {
        labels = merge_similar_topics(clusters.labels, counts, config.merge_threshold, cap);
    }
    const int K = labels.empty() ? 0 : std::max(0, *std::max_element(labels.begin(), labels.end()) + 1);

    r.labels = labels;
    for (std::size_t d = 0; d < n; ++d) r.probabilities[d] = labels[d] == kOutlier ? 0.0 : clusters.probabilities[d];
    if (K > 0) r.topic_word = topic_ctfidf(labels, counts, K);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);
    for (const int l : labels) {
        if (l != kOutlier) ++sizes[static_cast<std::size_t>(l)];
    }
    for (int t = 0; t < K; ++t) {
        r.topics.push_back(Topic{t,
                                 top_keywords(r.topic_word.row(t).transpose(), vocabulary,
                                              static_cast<std::size_t>(config.top_k_words)),
                                 sizes[static_cast<std::size_t>(t)]});
    }
    const auto outliers = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOutlier));
    r.diagnostics = json{{"embedder", embedder.name()},
                         {"clusters_found", clusters.num_clusters},
                         {"merges", clusters.num_clusters - K},
                         {"outliers", outliers}};
    return r;
}

}  // namespace topicbench::models
