#include "topicbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "topicbench/error.hpp"

namespace topicbench::metrics {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Boolean sliding-window occurrence counts restricted to a word list.
struct WindowCounts {
    std::vector<double> single;
    std::vector<double> joint;  // R x R, upper triangle filled
    double windows = 0.0;
    std::size_t R = 0;

    double p(std::size_t i) const { return single[i] / windows; }
    double p(std::size_t i, std::size_t j) const {
        if (i == j) return p(i);
        if (i > j) std::swap(i, j);
        return joint[i * R + j] / windows;
    }
};

WindowCounts count_windows(const std::unordered_map<std::string, std::size_t>& ids,
                           const std::vector<TokenSet>& reference, std::size_t window) {
    WindowCounts wc;
    wc.R = ids.size();
    wc.single.assign(wc.R, 0.0);
    wc.joint.assign(wc.R * wc.R, 0.0);
    std::vector<int> in_window(wc.R, 0);
    std::vector<std::size_t> present;
    std::vector<std::size_t> slot(wc.R, 0);

    const auto add = [&](long id) {
        if (id < 0) return;
        const auto u = static_cast<std::size_t>(id);
        if (in_window[u]++ == 0) {
            slot[u] = present.size();
            present.push_back(u);
        }
    };
    const auto remove = [&](long id) {
        if (id < 0) return;
        const auto u = static_cast<std::size_t>(id);
        if (--in_window[u] == 0) {
            const std::size_t last = present.back();
            present[slot[u]] = last;
            slot[last] = slot[u];
            present.pop_back();
        }
    };
    const auto record = [&] {
        wc.windows += 1.0;
        for (std::size_t a = 0; a < present.size(); ++a) {
            wc.single[present[a]] += 1.0;
            for (std::size_t b = a + 1; b < present.size(); ++b) {
                const std::size_t i = std::min(present[a], present[b]);
                const std::size_t j = std::max(present[a], present[b]);
                wc.joint[i * wc.R + j] += 1.0;
            }
        }
    };

    std::vector<long> doc;
    for (const auto& ts : reference) {
        if (ts.tokens.empty()) continue;
        doc.clear();
        for (const auto& t : ts.tokens) {
            const auto it = ids.find(t);
            doc.push_back(it == ids.end() ? -1 : static_cast<long>(it->second));
        }
        const std::size_t first = std::min(window, doc.size());
        for (std::size_t t = 0; t < first; ++t) add(doc[t]);
        record();
        for (std::size_t t = first; t < doc.size(); ++t) {
            add(doc[t]);
            remove(doc[t - window]);
            record();
        }
        for (std::size_t t = doc.size() - first; t < doc.size(); ++t) remove(doc[t]);
    }
    return wc;
}

double npmi(const WindowCounts& wc, std::size_t i, std::size_t j, double eps) {
    const double pi = wc.p(i);
    const double pj = wc.p(j);
    // Undefined for a word that never occurs; such words contribute nothing.
    if (pi == 0.0 || pj == 0.0) return 0.0;
    const double pij = wc.p(i, j);
    return std::log((pij + eps) / (pi * pj)) / -std::log(pij + eps);
}

std::vector<std::vector<std::string>> keyword_lists(const TopicModelResult& model, std::size_t top_k,
                                                    const char* metric) {
    std::vector<std::vector<std::string>> topics;
    for (const auto& t : model.topics) {
        std::vector<std::string> words;
        for (std::size_t i = 0; i < std::min(top_k, t.keywords.size()); ++i) words.push_back(t.keywords[i].word);
        if (words.size() < top_k) {
            spdlog::warn("{}: topic {} has {} keywords, fewer than top_k={}", metric, t.id, words.size(), top_k);
        }
        topics.push_back(std::move(words));
    }
    return topics;
}

Eigen::MatrixXd row_normalised(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double s = out.row(r).sum();
        if (s > 0.0) out.row(r) /= s;
    }
    return out;
}

}  // namespace

double topic_coherence(const std::vector<std::vector<std::string>>& topics, const std::vector<TokenSet>& reference,
                       const CoherenceOptions& options) {
    if (topics.empty()) throw ValidationError("coherence: model has no topics");
    if (options.window < 1) throw ConfigError("coherence: window must be >= 1");
    const bool any_token =
        std::any_of(reference.begin(), reference.end(), [](const TokenSet& t) { return !t.tokens.empty(); });
    if (!any_token) throw ValidationError("coherence: empty reference corpus");

    std::unordered_map<std::string, std::size_t> ids;
    for (const auto& t : topics) {
        for (const auto& w : t) ids.emplace(w, ids.size());
    }
    const auto wc = count_windows(ids, reference, options.window);

    double total = 0.0;
    for (const auto& t : topics) {
        if (t.empty()) continue;
        const auto m = static_cast<Eigen::Index>(t.size());
        Eigen::MatrixXd v(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            for (Eigen::Index b = 0; b < m; ++b) {
                v(a, b) = npmi(wc, ids.at(t[static_cast<std::size_t>(a)]), ids.at(t[static_cast<std::size_t>(b)]),
                               options.epsilon);
            }
        }
        const Eigen::RowVectorXd sum = v.colwise().sum();
        double topic_score = 0.0;
        for (Eigen::Index a = 0; a < m; ++a) {
            const double denom = v.row(a).norm() * sum.norm();
            topic_score += denom > 0.0 ? v.row(a).dot(sum) / denom : 0.0;
        }
        total += topic_score / static_cast<double>(m);
    }
    return total / static_cast<double>(topics.size());
}

double topic_coherence(const TopicModelResult& model, const std::vector<TokenSet>& reference,
                       const CoherenceOptions& options) {
    return topic_coherence(keyword_lists(model, options.top_k, "coherence"), reference, options);
}

double topic_diversity(const std::vector<std::vector<std::string>>& topics, std::size_t top_k) {
    if (topics.empty()) throw ValidationError("diversity: model has no topics");
    if (top_k < 1) throw ConfigError("diversity: top_k must be >= 1");
    std::set<std::string> unique;
    for (const auto& t : topics) {
        for (std::size_t i = 0; i < std::min(top_k, t.size()); ++i) unique.insert(t[i]);
    }
    return static_cast<double>(unique.size()) / static_cast<double>(topics.size() * top_k);
}

double topic_diversity(const TopicModelResult& model, std::size_t top_k) {
    return topic_diversity(keyword_lists(model, top_k, "diversity"), top_k);
}

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double epsilon) {
    if (p.size() == 0 || p.size() != q.size()) throw ValidationError("kl: distributions must be non-empty and aligned");
    if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) throw ValidationError("kl: negative probability");
    const Eigen::ArrayXd ps = (p.array() + epsilon) / (p.array() + epsilon).sum();
    const Eigen::ArrayXd qs = (q.array() + epsilon) / (q.array() + epsilon).sum();
    double d = 0.0;
    for (Eigen::Index i = 0; i < ps.size(); ++i) d += ps[i] * std::log(ps[i] / qs[i]);
    return std::max(0.0, d);
}

double kl_divergence(const TopicModelResult& model, const std::vector<TokenSet>& corpus, double epsilon) {
    if (model.num_topics() == 0) throw ValidationError("kl: model has no topics");
    std::unordered_map<std::string, Eigen::Index> col;
    for (std::size_t w = 0; w < model.vocabulary.size(); ++w) col.emplace(model.vocabulary[w], static_cast<Eigen::Index>(w));
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.vocabulary.size()));
    for (const auto& ts : corpus) {
        for (const auto& t : ts.tokens) {
            const auto it = col.find(t);
            if (it != col.end()) counts[it->second] += 1.0;
        }
    }
    std::vector<Eigen::Index> shared;
    for (Eigen::Index w = 0; w < counts.size(); ++w) {
        if (counts[w] > 0.0) shared.push_back(w);
    }
    if (shared.empty()) throw ValidationError("kl: empty vocabulary shared by model and corpus");
    const Eigen::RowVectorXd mean = row_normalised(model.topic_word).colwise().mean();
    Eigen::VectorXd p(static_cast<Eigen::Index>(shared.size()));
    Eigen::VectorXd q(static_cast<Eigen::Index>(shared.size()));
    for (std::size_t i = 0; i < shared.size(); ++i) {
        p[static_cast<Eigen::Index>(i)] = counts[shared[i]];
        q[static_cast<Eigen::Index>(i)] = mean[shared[i]];
    }
    p /= p.sum();
    const double qs = q.sum();
    if (qs > 0.0) q /= qs;
    return kl_divergence(p, q, epsilon);
}

double perplexity(const TopicModelResult& model, const std::vector<TokenSet>& held_out, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("perplexity: epsilon must lie in (0, 1)");
    const auto V = static_cast<Eigen::Index>(model.vocabulary.size());
    const double floor = epsilon / static_cast<double>(V + 1);
    std::unordered_map<std::string, Eigen::Index> col;
    for (Eigen::Index w = 0; w < V; ++w) col.emplace(model.vocabulary[static_cast<std::size_t>(w)], w);
    std::unordered_map<std::string, std::size_t> doc_index;
    for (std::size_t d = 0; d < model.doc_ids.size(); ++d) doc_index.emplace(model.doc_ids[d], d);

    const auto K = static_cast<Eigen::Index>(model.num_topics());
    const Eigen::MatrixXd phi = row_normalised(model.topic_word);
    Eigen::VectorXd fallback = Eigen::VectorXd::Zero(K);
    if (K > 0) {
        for (std::size_t d = 0; d < model.num_docs(); ++d) fallback += model.membership(d);
        const double s = fallback.sum();
        fallback = s > 0.0 ? Eigen::VectorXd(fallback / s) : Eigen::VectorXd::Constant(K, 1.0 / K);
    }

    double log_sum = 0.0;
    std::size_t n = 0;
    for (const auto& ts : held_out) {
        if (ts.tokens.empty()) continue;
        Eigen::RowVectorXd predictive;
        if (K == 0) {
            predictive = Eigen::RowVectorXd::Constant(V, V > 0 ? 1.0 / static_cast<double>(V) : 0.0);
        } else {
            Eigen::VectorXd theta = fallback;
            if (const auto it = doc_index.find(ts.thread_id); it != doc_index.end()) {
                const Eigen::VectorXd m = model.membership(it->second);
                const double s = m.sum();
                if (s > 0.0) theta = m / s;
            }
            predictive = theta.transpose() * phi;
        }
        for (const auto& t : ts.tokens) {
            const auto it = col.find(t);
            const double q = it == col.end() ? 0.0 : predictive[it->second];
            log_sum += std::log((1.0 - epsilon) * q + floor);
            ++n;
        }
    }
    if (n == 0) throw ValidationError("perplexity: held-out set has no tokens");
    return std::exp(-log_sum / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_from(const json& j, const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? kNaN : v.get<double>();
}

template <typename F>
double guarded(const char* metric, const std::string& method, F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        spdlog::warn("{} undefined for {}: {}", metric, method, e.what());
        return kNaN;
    }
}

}  // namespace

void to_json(json& j, const MetricsReport& r) {
    j = json{{"dataset", r.dataset},
             {"method", r.method},
             {"num_topics", r.num_topics},
             {"coherence", number_or_null(r.coherence)},
             {"diversity", number_or_null(r.diversity)},
             {"kl_divergence", number_or_null(r.kl_divergence)},
             {"perplexity", number_or_null(r.perplexity)},
             {"runtime_seconds", number_or_null(r.runtime_seconds)}};
}

void from_json(const json& j, MetricsReport& r) {
    try {
        r.dataset = j.at("dataset").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.num_topics = j.at("num_topics").get<std::size_t>();
        r.coherence = number_from(j, "coherence");
        r.diversity = number_from(j, "diversity");
        r.kl_divergence = number_from(j, "kl_divergence");
        r.perplexity = number_from(j, "perplexity");
        r.runtime_seconds = number_from(j, "runtime_seconds");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed metrics report: ") + e.what());
    }
}

MetricsReport evaluate(const TopicModelResult& model, const std::string& dataset,
                       const std::vector<TokenSet>& reference, const std::vector<TokenSet>& held_out,
                       const EvaluateOptions& options) {
    MetricsReport r;
    r.dataset = dataset;
    r.method = std::string(models::method_name(model.method));
    r.num_topics = model.num_topics();
    r.runtime_seconds = model.runtime_seconds;
    r.coherence = guarded("coherence", r.method, [&] { return topic_coherence(model, reference, options.coherence); });
    r.diversity = guarded("diversity", r.method, [&] { return topic_diversity(model, options.diversity_top_k); });
    r.kl_divergence = guarded("kl_divergence", r.method, [&] { return kl_divergence(model, reference, options.epsilon); });
    r.perplexity = guarded("perplexity", r.method, [&] { return perplexity(model, held_out, options.epsilon); });
    return r;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"num_topics", "coherence", "diversity",
                                                "kl_divergence", "perplexity", "runtime_seconds"};
    return names;
}

double metric_value(const MetricsReport& r, const std::string& metric) {
    if (metric == "num_topics") return static_cast<double>(r.num_topics);
    if (metric == "coherence") return r.coherence;
    if (metric == "diversity") return r.diversity;
    if (metric == "kl_divergence") return r.kl_divergence;
    if (metric == "perplexity") return r.perplexity;
    if (metric == "runtime_seconds") return r.runtime_seconds;
    throw ConfigError("unknown metric: " + metric);
}

void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write metrics: " + path.string());
    out << json(reports).dump(2) << '\n';
}

std::vector<MetricsReport> read_metrics_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("metrics not found: " + path.string());
    try {
        return json::parse(in).get<std::vector<MetricsReport>>();
    } catch (const json::exception& e) {
        throw ValidationError("malformed metrics file " + path.string() + ": " + e.what());
    }
}

std::string metric_table_csv(const std::vector<MetricsReport>& reports, const std::string& metric) {
    std::vector<std::string> datasets;
    std::vector<std::string> methods;
    std::map<std::pair<std::string, std::string>, double> cells;
    for (const auto& r : reports) {
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        cells[{r.dataset, r.method}] = metric_value(r, metric);
    }
    std::ostringstream out;
    out << "dataset";
    for (const auto& m : methods) out << ',' << m;
    out << '\n';
    for (const auto& d : datasets) {
        out << d;
        for (const auto& m : methods) {
            out << ',';
            const auto it = cells.find({d, m});
            if (it != cells.end() && std::isfinite(it->second)) out << fmt::format("{}", it->second);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace topicbench::metrics
