#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "rng.hpp"
#include "topicbench/error.hpp"
#include "topicbench/models.hpp"

namespace topicbench::models {

using nlohmann::json;

void NmfConfig::validate() const {
    if (num_topics < 1) throw ConfigError("nmf: num_topics must be >= 1");
    if (max_iter < 1) throw ConfigError("nmf: max_iter must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("nmf: tol must be > 0");
    if (top_k < 1) throw ConfigError("nmf: top_k must be >= 1");
}

void to_json(json& j, const NmfConfig& c) {
    j = json{{"num_topics", c.num_topics}, {"max_iter", c.max_iter}, {"tol", c.tol}, {"seed", c.seed},
             {"top_k", c.top_k}};
}

void from_json(const json& j, NmfConfig& c) {
    try {
        c.num_topics = j.value("num_topics", c.num_topics);
        c.max_iter = j.value("max_iter", c.max_iter);
        c.tol = j.value("tol", c.tol);
        c.seed = j.value("seed", c.seed);
        c.top_k = j.value("top_k", c.top_k);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("nmf config: ") + e.what());
    }
    c.validate();
}

namespace {

// 0.5 * ||X - WH||^2 expanded so X stays sparse.
double half_frobenius(double x_norm2, const SparseMatrix& X, const Eigen::MatrixXd& W, const Eigen::MatrixXd& H) {
    const Eigen::MatrixXd XHt = X * H.transpose();
    const double cross = (XHt.array() * W.array()).sum();
    const double model = ((W.transpose() * W).array() * (H * H.transpose()).array()).sum();
    return std::max(0.0, 0.5 * (x_norm2 - 2.0 * cross + model));
}

// x <- x * num / den elementwise; entries with a zero denominator stay put.
void multiplicative_step(Eigen::MatrixXd& x, const Eigen::MatrixXd& num, const Eigen::MatrixXd& den) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double d = den(i);
        if (d > 0.0) x(i) *= num(i) / d;
    }
}

}  // namespace

NmfFactors factorize_nmf(const SparseMatrix& X, const NmfConfig& config) {
    config.validate();
    const Eigen::Index n = X.rows();
    const Eigen::Index m = X.cols();
    const Eigen::Index k = config.num_topics;
    if (n == 0 || m == 0) throw ValidationError("nmf: empty matrix");
    if (k > std::min(n, m)) {
        throw ConfigError("nmf: num_topics (" + std::to_string(k) + ") exceeds min(documents, vocabulary) (" +
                          std::to_string(std::min(n, m)) + ")");
    }
    double sum = 0.0;
    double x_norm2 = 0.0;
    for (Eigen::Index r = 0; r < X.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(X, r); it; ++it) {
            if (it.value() < 0.0 || !std::isfinite(it.value())) {
                throw ValidationError("nmf: input matrix has a negative or non-finite entry at (" +
                                      std::to_string(it.row()) + ", " + std::to_string(it.col()) + ")");
            }
            sum += it.value();
            x_norm2 += it.value() * it.value();
        }
    }

    NmfFactors f;
    const double scale = std::sqrt(sum / static_cast<double>(n * m) / static_cast<double>(k));
    auto rng = detail::make_rng({config.seed, 0x4E4D46});
    f.H.resize(k, m);
    for (Eigen::Index i = 0; i < f.H.size(); ++i) f.H(i) = scale * detail::uniform01(rng);
    f.W.resize(n, k);
    for (Eigen::Index i = 0; i < f.W.size(); ++i) f.W(i) = scale * detail::uniform01(rng);

    const double initial = half_frobenius(x_norm2, X, f.W, f.H);
    f.objective.push_back(initial);
    double previous_check = initial;
    for (int it = 1; it <= config.max_iter; ++it) {
        {
            const Eigen::MatrixXd num = X * f.H.transpose();
            const Eigen::MatrixXd den = f.W * (f.H * f.H.transpose());
            multiplicative_step(f.W, num, den);
        }
        {
            const Eigen::MatrixXd num = (X.transpose() * f.W).transpose();
            const Eigen::MatrixXd den = (f.W.transpose() * f.W) * f.H;
            multiplicative_step(f.H, num, den);
        }
        const double obj = half_frobenius(x_norm2, X, f.W, f.H);
        f.objective.push_back(obj);
        f.iterations = it;
        if (initial <= 0.0 || obj <= 0.0) {
            f.converged = true;
            break;
        }
        if (it % 10 == 0) {
            if ((previous_check - obj) / initial < config.tol) {
                f.converged = true;
                break;
            }
            previous_check = obj;
        }
    }
    if (!f.converged) spdlog::warn("nmf: reached max_iter={} before tol={}", config.max_iter, config.tol);
    return f;
}

TopicModelResult train_nmf(const SparseMatrix& X, const std::vector<std::string>& vocabulary,
                           const std::vector<std::string>& doc_ids, const NmfConfig& config) {
    if (static_cast<Eigen::Index>(vocabulary.size()) != X.cols() ||
        static_cast<Eigen::Index>(doc_ids.size()) != X.rows()) {
        throw ValidationError("nmf: matrix shape does not match doc ids / vocabulary");
    }
    auto f = factorize_nmf(X, config);

    TopicModelResult r;
    r.method = Method::Nmf;
    r.seed = config.seed;
    r.config = config;
    r.doc_ids = doc_ids;
    r.vocabulary = vocabulary;
    r.doc_topic = std::move(f.W);
    r.topic_word = std::move(f.H);
    const auto K = static_cast<std::size_t>(config.num_topics);
    std::vector<std::size_t> sizes(K, 0);
    for (Eigen::Index d = 0; d < r.doc_topic.rows(); ++d) {
        Eigen::Index best = 0;
        if (r.doc_topic.row(d).maxCoeff(&best) > 0.0) ++sizes[static_cast<std::size_t>(best)];
    }
    for (std::size_t k = 0; k < K; ++k) {
        r.topics.push_back(Topic{static_cast<int>(k),
                                 top_keywords(r.topic_word.row(static_cast<Eigen::Index>(k)).transpose(), vocabulary,
                                              static_cast<std::size_t>(config.top_k)),
                                 sizes[k]});
    }
    r.diagnostics = json{{"iterations", f.iterations},
                         {"converged", f.converged},
                         {"objective_initial", f.objective.front()},
                         {"objective_final", f.objective.back()}};
    return r;
}

}  // namespace topicbench::models
