#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "topicbench/models.hpp"
#include "topicbench/preprocess.hpp"

namespace topicbench::metrics {

using models::TopicModelResult;
using preprocess::TokenSet;

inline constexpr double kEpsilon = 1e-12;

// ---------------------------------------------------------------------------
// Coherence

struct CoherenceOptions {
    std::size_t top_k = 10;
    std::size_t window = 110;
    double epsilon = kEpsilon;
};

/// C_v: boolean sliding-window counts over `reference`, NPMI context vectors
/// within each topic, cosine of each word against the topic sum, averaged
/// over words then topics. Throws ValidationError when `reference` has no
/// tokens or there are no topics.
double topic_coherence(const std::vector<std::vector<std::string>>& topics, const std::vector<TokenSet>& reference,
                       const CoherenceOptions& options = {});

/// Uses each topic's first top_k keywords; shorter topics are scored as is
/// with a warning.
double topic_coherence(const TopicModelResult& model, const std::vector<TokenSet>& reference,
                       const CoherenceOptions& options = {});

// ---------------------------------------------------------------------------
// Diversity

/// |unique words in every topic's top_k| / (K * top_k).
double topic_diversity(const std::vector<std::vector<std::string>>& topics, std::size_t top_k = 10);
double topic_diversity(const TopicModelResult& model, std::size_t top_k = 10);

// ---------------------------------------------------------------------------
// KL divergence

/// D(P || Q) in nats after adding `epsilon` to every entry of both inputs and
/// renormalising. Inputs must be nonnegative, equal length and non-empty.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double epsilon = kEpsilon);

/// P = empirical word distribution of `corpus`, Q = mean of the
/// row-normalised topic-word rows, both restricted to the shared vocabulary.
double kl_divergence(const TopicModelResult& model, const std::vector<TokenSet>& corpus, double epsilon = kEpsilon);

// ---------------------------------------------------------------------------
// Perplexity

/// exp(-mean log p(w)) over held-out tokens, where p mixes the document's
/// membership with the row-normalised topic-word rows and reserves
/// `epsilon` mass spread over the vocabulary plus one out-of-vocabulary
/// outcome. Documents unknown to the model, or without membership, use the
/// mean membership; a model without topics predicts uniformly.
double perplexity(const TopicModelResult& model, const std::vector<TokenSet>& held_out, double epsilon = kEpsilon);

// ---------------------------------------------------------------------------
// Timing

template <typename T>
struct Timed {
    T value;
    double seconds;
};

/// Wall-clock seconds of `job()`; exceptions propagate untouched.
template <typename F>
auto timed(F&& job) {
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
        std::forward<F>(job)();
        return elapsed();
    } else {
        auto value = std::forward<F>(job)();
        return Timed<decltype(value)>{std::move(value), elapsed()};
    }
}

/// Runs a trainer and records its wall-clock time into the result.
template <typename F>
TopicModelResult timed_training(F&& train) {
    auto t = timed(std::forward<F>(train));
    t.value.runtime_seconds = t.seconds;
    return std::move(t.value);
}

// ---------------------------------------------------------------------------
// Reports

/// NaN marks a metric that is undefined for the model (e.g. no topics); it
/// is written as JSON null and an empty CSV cell.
struct MetricsReport {
    std::string dataset;
    std::string method;
    std::size_t num_topics = 0;
    double coherence = 0.0;
    double diversity = 0.0;
    double kl_divergence = 0.0;
    double perplexity = 0.0;
    double runtime_seconds = 0.0;
};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

struct EvaluateOptions {
    CoherenceOptions coherence;
    std::size_t diversity_top_k = 10;
    double epsilon = kEpsilon;
};

/// Every metric for one model. `reference` feeds coherence and KL,
/// `held_out` feeds perplexity (pass the training sets for in-sample).
MetricsReport evaluate(const TopicModelResult& model, const std::string& dataset,
                       const std::vector<TokenSet>& reference, const std::vector<TokenSet>& held_out,
                       const EvaluateOptions& options = {});

/// Metric names accepted by the table helpers.
const std::vector<std::string>& metric_names();  // coherence, diversity, kl_divergence, perplexity, runtime_seconds, num_topics
double metric_value(const MetricsReport& r, const std::string& metric);

void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> read_metrics_json(const std::filesystem::path& path);

/// One table: rows = datasets, columns = methods (first-seen order).
std::string metric_table_csv(const std::vector<MetricsReport>& reports, const std::string& metric);

}  // namespace topicbench::metrics
