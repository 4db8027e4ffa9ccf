#include <algorithm>
#include <numeric>
#include <thread>

#include <boost/math/special_functions/digamma.hpp>
#include <spdlog/spdlog.h>

#include "rng.hpp"
#include "topicbench/error.hpp"
#include "topicbench/models.hpp"

namespace topicbench::models {

using nlohmann::json;

int LdaConfig::default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 1 ? static_cast<int>(hw) - 1 : 1;
}

void LdaConfig::validate() const {
    if (num_topics < 1) throw ConfigError("lda: num_topics must be >= 1");
    if (workers < 1) throw ConfigError("lda: workers must be >= 1");
    if (passes < 1 || sweeps_per_pass < 1) throw ConfigError("lda: passes and sweeps_per_pass must be >= 1");
    if (eta_update_interval < 1) throw ConfigError("lda: eta_update_interval must be >= 1");
    if (alpha && !(*alpha > 0.0)) throw ConfigError("lda: alpha must be > 0");
    if (eta && !(*eta > 0.0)) throw ConfigError("lda: eta must be > 0");
    if (top_k < 1) throw ConfigError("lda: top_k must be >= 1");
}

void to_json(json& j, const LdaConfig& c) {
    j = json{{"num_topics", c.num_topics},
             {"alpha", c.alpha ? json(*c.alpha) : json("symmetric")},
             {"eta", c.eta_auto ? json("auto") : json(c.eta.value_or(1.0 / c.num_topics))},
             {"passes", c.passes},
             {"sweeps_per_pass", c.sweeps_per_pass},
             {"eta_update_interval", c.eta_update_interval},
             {"workers", c.workers},
             {"seed", c.seed},
             {"top_k", c.top_k}};
}

void from_json(const json& j, LdaConfig& c) {
    try {
        c.num_topics = j.value("num_topics", c.num_topics);
        if (j.contains("alpha")) {
            const auto& a = j.at("alpha");
            if (a.is_number()) {
                c.alpha = a.get<double>();
            } else if (a.is_string() && a.get<std::string>() == "symmetric") {
                c.alpha.reset();
            } else {
                throw ConfigError("lda: alpha must be a number or \"symmetric\"");
            }
        }
        if (j.contains("eta")) {
            const auto& e = j.at("eta");
            if (e.is_string() && e.get<std::string>() == "auto") {
                c.eta_auto = true;
            } else if (e.is_number()) {
                c.eta_auto = false;
                c.eta = e.get<double>();
            } else {
                throw ConfigError("lda: eta must be a number or \"auto\"");
            }
        }
        c.passes = j.value("passes", c.passes);
        c.sweeps_per_pass = j.value("sweeps_per_pass", c.sweeps_per_pass);
        c.eta_update_interval = j.value("eta_update_interval", c.eta_update_interval);
        c.workers = j.value("workers", c.workers);
        c.seed = j.value("seed", c.seed);
        c.top_k = j.value("top_k", c.top_k);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("lda config: ") + e.what());
    }
    c.validate();
}

namespace {

struct GibbsState {
    std::size_t K = 0;
    std::size_t V = 0;
    std::vector<std::uint32_t> words;     // flattened token ids
    std::vector<std::uint32_t> topics;    // assignment per token
    std::vector<std::size_t> doc_start;   // D + 1 offsets into words
    std::vector<std::int32_t> ndk;        // D x K
    std::vector<std::int32_t> nwk;        // V x K
    std::vector<std::int64_t> nk;         // K
};

// One sweep over documents [d0, d1); `nwk`/`nk` are the word counts this
// shard reads and writes.
void sweep_shard(GibbsState& s, std::size_t d0, std::size_t d1, std::vector<std::int32_t>& nwk,
                 std::vector<std::int64_t>& nk, double alpha, const std::vector<double>& eta, double eta_sum,
                 std::mt19937_64& rng) {
    const std::size_t K = s.K;
    std::vector<double> cdf(K);
    for (std::size_t d = d0; d < d1; ++d) {
        std::int32_t* nd = &s.ndk[d * K];
        for (std::size_t i = s.doc_start[d]; i < s.doc_start[d + 1]; ++i) {
            const std::uint32_t w = s.words[i];
            const std::uint32_t old = s.topics[i];
            std::int32_t* nw = &nwk[static_cast<std::size_t>(w) * K];
            --nd[old];
            --nw[old];
            --nk[old];
            double total = 0.0;
            const double ew = eta[w];
            for (std::size_t k = 0; k < K; ++k) {
                total += (nd[k] + alpha) * (nw[k] + ew) / (static_cast<double>(nk[k]) + eta_sum);
                cdf[k] = total;
            }
            const double u = detail::uniform01(rng) * total;
            auto k_new = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            if (k_new >= K) k_new = static_cast<std::uint32_t>(K - 1);
            s.topics[i] = k_new;
            ++nd[k_new];
            ++nw[k_new];
            ++nk[k_new];
        }
    }
}

// Minka's fixed-point step for an asymmetric Dirichlet prior over words,
// treating each topic's word counts as one draw.
void update_eta(const GibbsState& s, std::vector<double>& eta) {
    using boost::math::digamma;
    const double eta_sum = std::accumulate(eta.begin(), eta.end(), 0.0);
    double denom = 0.0;
    for (std::size_t k = 0; k < s.K; ++k) denom += digamma(static_cast<double>(s.nk[k]) + eta_sum) - digamma(eta_sum);
    if (!(denom > 0.0)) return;
    for (std::size_t w = 0; w < s.V; ++w) {
        double num = 0.0;
        for (std::size_t k = 0; k < s.K; ++k) {
            num += digamma(s.nwk[w * s.K + k] + eta[w]) - digamma(eta[w]);
        }
        eta[w] = std::max(eta[w] * num / denom, 1e-10);
    }
}

}  // namespace

TopicModelResult train_lda(const BowCorpus& corpus, const std::vector<std::string>& vocabulary,
                           const LdaConfig& config) {
    config.validate();
    const std::size_t D = corpus.num_docs();
    const auto K = static_cast<std::size_t>(config.num_topics);
    const std::size_t V = corpus.vocab_size;
    if (D == 0 || corpus.num_tokens() == 0) throw ValidationError("lda: empty corpus");
    if (K > D) {
        throw ConfigError("lda: num_topics (" + std::to_string(K) + ") exceeds number of documents (" +
                          std::to_string(D) + ")");
    }
    if (vocabulary.size() != V) throw ValidationError("lda: vocabulary size does not match corpus");

    const double alpha = config.alpha.value_or(1.0 / static_cast<double>(K));
    std::vector<double> eta(V, config.eta.value_or(1.0 / static_cast<double>(K)));

    GibbsState s;
    s.K = K;
    s.V = V;
    s.doc_start.reserve(D + 1);
    s.doc_start.push_back(0);
    for (const auto& doc : corpus.docs) {
        for (const auto& [id, count] : doc) {
            for (std::size_t c = 0; c < count; ++c) s.words.push_back(static_cast<std::uint32_t>(id));
        }
        s.doc_start.push_back(s.words.size());
    }
    s.topics.resize(s.words.size());
    s.ndk.assign(D * K, 0);
    s.nwk.assign(V * K, 0);
    s.nk.assign(K, 0);
    {
        auto rng = detail::make_rng({config.seed, 0x1DA});
        for (std::size_t d = 0; d < D; ++d) {
            for (std::size_t i = s.doc_start[d]; i < s.doc_start[d + 1]; ++i) {
                const auto k = static_cast<std::uint32_t>(detail::uniform_index(rng, K));
                s.topics[i] = k;
                ++s.ndk[d * K + k];
                ++s.nwk[static_cast<std::size_t>(s.words[i]) * K + k];
                ++s.nk[k];
            }
        }
    }

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), D);
    std::vector<std::size_t> shard_start(workers + 1);
    for (std::size_t w = 0; w <= workers; ++w) shard_start[w] = w * D / workers;

    const int total_sweeps = config.passes * config.sweeps_per_pass;
    int eta_updates = 0;
    for (int sweep = 0; sweep < total_sweeps; ++sweep) {
        const double eta_sum = std::accumulate(eta.begin(), eta.end(), 0.0);
        if (workers == 1) {
            auto rng = detail::make_rng({config.seed, 0, static_cast<std::uint64_t>(sweep)});
            sweep_shard(s, 0, D, s.nwk, s.nk, alpha, eta, eta_sum, rng);
        } else {
            std::vector<std::vector<std::int32_t>> local_nwk(workers, s.nwk);
            std::vector<std::vector<std::int64_t>> local_nk(workers, s.nk);
            std::vector<std::thread> threads;
            threads.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                threads.emplace_back([&, w] {
                    auto rng = detail::make_rng({config.seed, w, static_cast<std::uint64_t>(sweep)});
                    sweep_shard(s, shard_start[w], shard_start[w + 1], local_nwk[w], local_nk[w], alpha, eta,
                                eta_sum, rng);
                });
            }
            for (auto& t : threads) t.join();
            // Merge shard deltas in shard order.
            const auto base_nwk = s.nwk;
            const auto base_nk = s.nk;
            for (std::size_t w = 0; w < workers; ++w) {
                for (std::size_t i = 0; i < s.nwk.size(); ++i) s.nwk[i] += local_nwk[w][i] - base_nwk[i];
                for (std::size_t k = 0; k < K; ++k) s.nk[k] += local_nk[w][k] - base_nk[k];
            }
        }
        if (config.eta_auto && (sweep + 1) % config.eta_update_interval == 0) {
            update_eta(s, eta);
            ++eta_updates;
        }
    }

    TopicModelResult r;
    r.method = Method::Lda;
    r.seed = config.seed;
    r.config = config;
    r.doc_ids = corpus.doc_ids;
    r.vocabulary = vocabulary;
    r.doc_topic.resize(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(K));
    for (std::size_t d = 0; d < D; ++d) {
        const double len = static_cast<double>(s.doc_start[d + 1] - s.doc_start[d]);
        for (std::size_t k = 0; k < K; ++k) {
            r.doc_topic(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
                (s.ndk[d * K + k] + alpha) / (len + static_cast<double>(K) * alpha);
        }
    }
    const double eta_sum = std::accumulate(eta.begin(), eta.end(), 0.0);
    r.topic_word.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(V));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t w = 0; w < V; ++w) {
            r.topic_word(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w)) =
                (s.nwk[w * K + k] + eta[w]) / (static_cast<double>(s.nk[k]) + eta_sum);
        }
    }
    std::vector<std::size_t> sizes(K, 0);
    for (Eigen::Index d = 0; d < r.doc_topic.rows(); ++d) {
        if (s.doc_start[static_cast<std::size_t>(d) + 1] == s.doc_start[static_cast<std::size_t>(d)]) continue;
        Eigen::Index best = 0;
        r.doc_topic.row(d).maxCoeff(&best);
        ++sizes[static_cast<std::size_t>(best)];
    }
    for (std::size_t k = 0; k < K; ++k) {
        r.topics.push_back(Topic{static_cast<int>(k),
                                 top_keywords(r.topic_word.row(static_cast<Eigen::Index>(k)).transpose(), vocabulary,
                                              static_cast<std::size_t>(config.top_k)),
                                 sizes[k]});
    }
    r.diagnostics = json{{"alpha", alpha},
                         {"eta_sum", eta_sum},
                         {"eta_updates", eta_updates},
                         {"sweeps", total_sweeps},
                         {"workers", workers}};
    spdlog::debug("lda: K={} docs={} tokens={} sweeps={} workers={}", K, D, s.words.size(), total_sweeps, workers);
    return r;
}

}  // namespace topicbench::models
