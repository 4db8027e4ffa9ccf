#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "topicbench/error.hpp"
#include "topicbench/models.hpp"

namespace topicbench::models {

using nlohmann::json;

std::optional<std::size_t> Vocabulary::id(const std::string& token) const {
    const auto it = ids_.find(token);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

Vocabulary build_vocabulary(const std::vector<preprocess::TokenSet>& token_sets) {
    std::map<std::string, std::size_t> df;
    for (const auto& ts : token_sets) {
        std::vector<std::string> uniq = ts.tokens;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (const auto& t : uniq) ++df[t];
    }
    if (df.empty()) throw ValidationError("empty corpus");
    Vocabulary v;
    v.tokens_.reserve(df.size());
    v.df_.reserve(df.size());
    for (const auto& [token, count] : df) {
        v.ids_.emplace(token, v.tokens_.size());
        v.tokens_.push_back(token);
        v.df_.push_back(count);
    }
    return v;
}

std::size_t BowCorpus::num_tokens() const {
    std::size_t n = 0;
    for (const auto& d : docs) {
        for (const auto& [id, c] : d) n += c;
    }
    return n;
}

BowCorpus to_bow(const std::vector<preprocess::TokenSet>& token_sets, const Vocabulary& vocab) {
    BowCorpus corpus;
    corpus.vocab_size = vocab.size();
    corpus.doc_ids.reserve(token_sets.size());
    corpus.docs.reserve(token_sets.size());
    for (const auto& ts : token_sets) {
        std::map<std::size_t, std::size_t> counts;
        for (const auto& t : ts.tokens) {
            if (const auto id = vocab.id(t)) ++counts[*id];
        }
        corpus.doc_ids.push_back(ts.thread_id);
        corpus.docs.emplace_back(counts.begin(), counts.end());
    }
    return corpus;
}

SparseMatrix tfidf_matrix(const BowCorpus& corpus) {
    const auto n = static_cast<double>(corpus.num_docs());
    std::vector<double> df(corpus.vocab_size, 0.0);
    for (const auto& d : corpus.docs) {
        for (const auto& [id, c] : d) df[id] += 1.0;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        double norm2 = 0.0;
        std::vector<double> w;
        w.reserve(corpus.docs[i].size());
        for (const auto& [id, c] : corpus.docs[i]) {
            const double v = static_cast<double>(c) * (std::log((1.0 + n) / (1.0 + df[id])) + 1.0);
            w.push_back(v);
            norm2 += v * v;
        }
        const double norm = std::sqrt(norm2);
        for (std::size_t k = 0; k < w.size(); ++k) {
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(corpus.docs[i][k].first), w[k] / norm);
        }
    }
    SparseMatrix X(static_cast<Eigen::Index>(corpus.num_docs()), static_cast<Eigen::Index>(corpus.vocab_size));
    X.setFromTriplets(triplets.begin(), triplets.end());
    X.makeCompressed();
    return X;
}

// ---------------------------------------------------------------------------

std::string_view method_name(Method m) {
    switch (m) {
        case Method::Lda: return "LDA";
        case Method::Nmf: return "NMF";
        case Method::Embed: return "EMBED";
    }
    return "?";
}

std::string_view method_slug(Method m) {
    switch (m) {
        case Method::Lda: return "lda";
        case Method::Nmf: return "nmf";
        case Method::Embed: return "embed";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "lda") return Method::Lda;
    if (s == "nmf") return Method::Nmf;
    if (s == "embed" || s == "bertopic") return Method::Embed;
    throw ConfigError("unknown method: " + std::string(name));
}

std::vector<Keyword> top_keywords(const Eigen::Ref<const Eigen::VectorXd>& row,
                                  const std::vector<std::string>& vocabulary, std::size_t k) {
    std::vector<std::size_t> order(static_cast<std::size_t>(row.size()));
    std::iota(order.begin(), order.end(), 0);
    const auto cmp = [&](std::size_t a, std::size_t b) {
        if (row[static_cast<Eigen::Index>(a)] != row[static_cast<Eigen::Index>(b)]) {
            return row[static_cast<Eigen::Index>(a)] > row[static_cast<Eigen::Index>(b)];
        }
        return vocabulary[a] < vocabulary[b];
    };
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), cmp);
    std::vector<Keyword> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back(Keyword{vocabulary[order[i]], row[static_cast<Eigen::Index>(order[i])]});
    }
    return out;
}

Eigen::VectorXd TopicModelResult::membership(std::size_t d) const {
    const auto k = static_cast<Eigen::Index>(num_topics());
    if (soft()) {
        Eigen::VectorXd row = doc_topic.row(static_cast<Eigen::Index>(d)).transpose();
        const double s = row.sum();
        if (s > 0.0) row /= s;
        return row;
    }
    Eigen::VectorXd row = Eigen::VectorXd::Zero(k);
    const int label = labels.at(d);
    if (label != kOutlier) row[label] = 1.0;
    return row;
}

void TopicModelResult::validate() const {
    const auto k = static_cast<Eigen::Index>(num_topics());
    const auto d = static_cast<Eigen::Index>(num_docs());
    if (topic_word.rows() != k || topic_word.cols() != static_cast<Eigen::Index>(vocabulary.size())) {
        throw ValidationError("topic_word shape does not match topics x vocabulary");
    }
    for (const auto& t : topics) {
        for (std::size_t i = 1; i < t.keywords.size(); ++i) {
            if (t.keywords[i].weight > t.keywords[i - 1].weight) {
                throw ValidationError("keywords of topic " + std::to_string(t.id) + " not in descending order");
            }
        }
    }
    switch (method) {
        case Method::Lda:
            for (Eigen::Index i = 0; i < d; ++i) {
                if (std::abs(doc_topic.row(i).sum() - 1.0) > 1e-6) throw ValidationError("LDA doc row not a simplex");
            }
            for (Eigen::Index i = 0; i < k; ++i) {
                if (std::abs(topic_word.row(i).sum() - 1.0) > 1e-6) {
                    throw ValidationError("LDA topic row not a simplex");
                }
            }
            [[fallthrough]];
        case Method::Nmf:
            if (doc_topic.rows() != d || doc_topic.cols() != k) throw ValidationError("doc_topic shape mismatch");
            if ((doc_topic.array() < 0.0).any() || (topic_word.array() < 0.0).any()) {
                throw ValidationError("negative factor entry");
            }
            break;
        case Method::Embed:
            if (labels.size() != num_docs() || probabilities.size() != num_docs()) {
                throw ValidationError("labels/probabilities length mismatch");
            }
            for (const int l : labels) {
                if (l < kOutlier || l >= k) throw ValidationError("label out of range");
            }
            break;
    }
}

bool operator==(const TopicModelResult& a, const TopicModelResult& b) {
    return a.method == b.method && a.topics == b.topics && a.doc_ids == b.doc_ids && a.doc_topic == b.doc_topic &&
           a.labels == b.labels && a.probabilities == b.probabilities && a.vocabulary == b.vocabulary &&
           a.topic_word == b.topic_word && a.config == b.config && a.seed == b.seed &&
           a.diagnostics == b.diagnostics;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
        rows.push_back(std::move(r));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& row = j[i];
        if (static_cast<Eigen::Index>(row.size()) != cols) throw ValidationError("ragged matrix in model artifact");
        for (std::size_t c = 0; c < row.size(); ++c) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c].get<double>();
        }
    }
    return m;
}

}  // namespace

void to_json(json& j, const TopicModelResult& r) {
    json topics = json::array();
    for (const auto& t : r.topics) {
        json kw = json::array();
        for (const auto& k : t.keywords) kw.push_back(json::array({k.word, k.weight}));
        topics.push_back({{"topic_id", t.id}, {"keywords", kw}, {"size", t.size}});
    }
    j = json{{"method", method_name(r.method)},
             {"num_topics", r.num_topics()},
             {"seed", r.seed},
             {"config", r.config},
             {"topics", topics},
             {"doc_ids", r.doc_ids},
             {"vocabulary", r.vocabulary},
             {"topic_word", matrix_to_json(r.topic_word)},
             {"diagnostics", r.diagnostics}};
    if (r.soft()) {
        j["doc_topic"] = matrix_to_json(r.doc_topic);
    } else {
        j["labels"] = r.labels;
        j["probabilities"] = r.probabilities;
    }
}

void from_json(const json& j, TopicModelResult& r) {
    try {
        r.method = parse_method(j.at("method").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.config = j.at("config");
        r.topics.clear();
        for (const auto& t : j.at("topics")) {
            Topic topic;
            topic.id = t.at("topic_id").get<int>();
            topic.size = t.at("size").get<std::size_t>();
            for (const auto& k : t.at("keywords")) {
                topic.keywords.push_back(Keyword{k.at(0).get<std::string>(), k.at(1).get<double>()});
            }
            r.topics.push_back(std::move(topic));
        }
        r.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
        r.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
        r.topic_word = matrix_from_json(j.at("topic_word"), static_cast<Eigen::Index>(r.vocabulary.size()));
        r.diagnostics = j.value("diagnostics", json::object());
        r.runtime_seconds = 0.0;
        if (r.soft()) {
            r.doc_topic = matrix_from_json(j.at("doc_topic"), static_cast<Eigen::Index>(r.topics.size()));
            r.labels.clear();
            r.probabilities.clear();
        } else {
            r.doc_topic.resize(0, 0);
            r.labels = j.at("labels").get<std::vector<int>>();
            r.probabilities = j.at("probabilities").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model artifact: ") + e.what());
    }
    r.validate();
}

void write_model(const std::filesystem::path& path, const TopicModelResult& r) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write model: " + path.string());
    out << json(r).dump() << '\n';
}

TopicModelResult read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("model not found: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("malformed model artifact " + path.string() + ": " + e.what());
    }
    return j.get<TopicModelResult>();
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd compute_ctfidf(const Eigen::MatrixXd& counts) {
    if ((counts.array() < 0.0).any()) throw ValidationError("c-TF-IDF counts must be non-negative");
    const double total = counts.sum();
    if (counts.size() == 0 || total <= 0.0) throw ValidationError("c-TF-IDF of an all-zero matrix");
    const double avg_words = total / static_cast<double>(counts.rows());
    const Eigen::RowVectorXd f = counts.colwise().sum();
    Eigen::MatrixXd out = counts;
    for (Eigen::Index w = 0; w < counts.cols(); ++w) {
        const double idf = f[w] > 0.0 ? std::log(1.0 + avg_words / f[w]) : 0.0;
        out.col(w) *= idf;
    }
    return out;
}

}  // namespace topicbench::models
