#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "rng.hpp"
#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"

namespace topicbench::models {

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::Euclidean;
    if (name == "cosine") return Metric::Cosine;
    throw ConfigError("unknown metric: " + name);
}

std::string metric_name(Metric m) {
    return m == Metric::Cosine ? "cosine" : "euclidean";
}

KnnGraph exact_knn(const Eigen::MatrixXd& X, int k, Metric metric) {
    const Eigen::Index n = X.rows();
    if (k < 1 || k >= n) throw ValidationError("exact_knn: need 1 <= k < number of points");
    Eigen::MatrixXd Y = X;
    if (metric == Metric::Cosine) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double norm = Y.row(i).norm();
            if (norm > 0.0) Y.row(i) /= norm;
        }
    }
    const Eigen::VectorXd sq = Y.rowwise().squaredNorm();
    KnnGraph g;
    g.indices.resize(static_cast<std::size_t>(n));
    g.distances.resize(static_cast<std::size_t>(n));
    constexpr Eigen::Index kBlock = 256;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (Eigen::Index b0 = 0; b0 < n; b0 += kBlock) {
        const Eigen::Index rows = std::min(kBlock, n - b0);
        const Eigen::MatrixXd dots = Y.middleRows(b0, rows) * Y.transpose();
        for (Eigen::Index r = 0; r < rows; ++r) {
            const Eigen::Index i = b0 + r;
            std::vector<double> dist(static_cast<std::size_t>(n));
            for (Eigen::Index j = 0; j < n; ++j) {
                double d = 0.0;
                if (metric == Metric::Cosine) {
                    d = std::max(0.0, 1.0 - dots(r, j));
                } else {
                    d = std::sqrt(std::max(0.0, sq[i] + sq[j] - 2.0 * dots(r, j)));
                }
                dist[static_cast<std::size_t>(j)] = d;
            }
            std::iota(order.begin(), order.end(), 0);
            std::swap(order[static_cast<std::size_t>(i)], order.back());
            const auto cmp = [&](int a, int b) {
                const double da = dist[static_cast<std::size_t>(a)];
                const double db = dist[static_cast<std::size_t>(b)];
                return da != db ? da < db : a < b;
            };
            std::partial_sort(order.begin(), order.begin() + k, order.end() - 1, cmp);
            auto& idx = g.indices[static_cast<std::size_t>(i)];
            auto& ds = g.distances[static_cast<std::size_t>(i)];
            idx.assign(order.begin(), order.begin() + k);
            ds.resize(static_cast<std::size_t>(k));
            for (int m = 0; m < k; ++m) ds[static_cast<std::size_t>(m)] = dist[static_cast<std::size_t>(idx[static_cast<std::size_t>(m)])];
        }
    }
    return g;
}

std::pair<double, double> fit_ab(double spread, double min_dist) {
    constexpr int kPoints = 300;
    std::vector<double> xs(kPoints);
    std::vector<double> ys(kPoints);
    for (int i = 0; i < kPoints; ++i) {
        xs[i] = spread * 3.0 * i / (kPoints - 1);
        ys[i] = xs[i] < min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
    }
    // Levenberg-Marquardt on (a, b); x = 0 contributes nothing for b > 0.
    double a = 1.0;
    double b = 1.0;
    double lambda = 1e-3;
    const auto sse = [&](double a_, double b_) {
        double s = 0.0;
        for (int i = 0; i < kPoints; ++i) {
            const double r = 1.0 / (1.0 + a_ * std::pow(xs[i], 2.0 * b_)) - ys[i];
            s += r * r;
        }
        return s;
    };
    double current = sse(a, b);
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::Matrix2d JtJ = Eigen::Matrix2d::Zero();
        Eigen::Vector2d Jtr = Eigen::Vector2d::Zero();
        for (int i = 0; i < kPoints; ++i) {
            if (xs[i] <= 0.0) continue;
            const double p = std::pow(xs[i], 2.0 * b);
            const double denom = 1.0 + a * p;
            const double f = 1.0 / denom;
            const double r = f - ys[i];
            const double da = -p / (denom * denom);
            const double db = -a * p * 2.0 * std::log(xs[i]) / (denom * denom);
            const Eigen::Vector2d J(da, db);
            JtJ += J * J.transpose();
            Jtr += J * r;
        }
        Eigen::Matrix2d A = JtJ;
        A.diagonal() *= (1.0 + lambda);
        const Eigen::Vector2d step = A.ldlt().solve(-Jtr);
        const double na = a + step[0];
        const double nb = b + step[1];
        const double next = (na > 0.0 && nb > 0.0) ? sse(na, nb) : std::numeric_limits<double>::infinity();
        if (next < current) {
            const bool done = current - next < 1e-15 * std::max(1.0, current);
            a = na;
            b = nb;
            current = next;
            lambda = std::max(lambda / 10.0, 1e-12);
            if (done) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    return {a, b};
}

FuzzyGraph fuzzy_simplicial_set(const KnnGraph& knn, std::size_t n_points) {
    // Neighbour lists exclude the point itself, so the target uses k + 1.
    const std::size_t k = knn.indices.empty() ? 0 : knn.indices.front().size();
    const double target = std::log2(static_cast<double>(k + 1));
    double mean_all = 0.0;
    std::size_t count_all = 0;
    for (const auto& ds : knn.distances) {
        for (const double d : ds) mean_all += d;
        count_all += ds.size();
    }
    mean_all = count_all > 0 ? mean_all / static_cast<double>(count_all) : 0.0;

    std::map<std::pair<int, int>, double> directed;
    for (std::size_t i = 0; i < n_points; ++i) {
        const auto& ds = knn.distances[i];
        double rho = 0.0;
        for (const double d : ds) {
            if (d > 0.0) {
                rho = d;
                break;
            }
        }
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double mid = 1.0;
        for (int it = 0; it < 64; ++it) {
            double psum = 0.0;
            for (const double d : ds) {
                const double x = d - rho;
                psum += x > 0.0 ? std::exp(-x / mid) : 1.0;
            }
            if (std::abs(psum - target) < 1e-5) break;
            if (psum > target) {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = std::isinf(hi) ? mid * 2.0 : (lo + hi) / 2.0;
            }
        }
        double mean_i = 0.0;
        for (const double d : ds) mean_i += d;
        mean_i = ds.empty() ? 0.0 : mean_i / static_cast<double>(ds.size());
        const double sigma = std::max(mid, 1e-3 * (rho > 0.0 ? mean_i : mean_all));
        for (std::size_t m = 0; m < ds.size(); ++m) {
            const double x = ds[m] - rho;
            const double w = x <= 0.0 || sigma <= 0.0 ? 1.0 : std::exp(-x / sigma);
            directed[{static_cast<int>(i), knn.indices[i][m]}] = w;
        }
    }
    // Fuzzy union: w_ij + w_ji - w_ij * w_ji.
    FuzzyGraph g;
    for (const auto& [edge, w] : directed) {
        const auto rev = directed.find({edge.second, edge.first});
        const double wr = rev == directed.end() ? 0.0 : rev->second;
        const double u = w + wr - w * wr;
        if (u <= 0.0) continue;
        g.head.push_back(edge.first);
        g.tail.push_back(edge.second);
        g.weight.push_back(u);
        if (rev == directed.end()) {
            g.head.push_back(edge.second);
            g.tail.push_back(edge.first);
            g.weight.push_back(u);
        }
    }
    return g;
}

namespace {

int count_components(const FuzzyGraph& g, std::size_t n) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    int components = static_cast<int>(n);
    for (std::size_t e = 0; e < g.head.size(); ++e) {
        const int a = find(g.head[e]);
        const int b = find(g.tail[e]);
        if (a != b) {
            parent[static_cast<std::size_t>(a)] = b;
            --components;
        }
    }
    return components;
}

// Eigenvectors 1..dim of the symmetric normalised Laplacian, scaled into
// [-10, 10] with a little seeded noise.
Eigen::MatrixXd spectral_init(const FuzzyGraph& g, std::size_t n, int dim, std::mt19937_64& rng) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t e = 0; e < g.head.size(); ++e) W(g.head[e], g.tail[e]) = g.weight[e];
    const Eigen::VectorXd deg = W.rowwise().sum();
    Eigen::VectorXd inv_sqrt(deg.size());
    for (Eigen::Index i = 0; i < deg.size(); ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
    Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * W * inv_sqrt.asDiagonal());
    L.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
    Eigen::MatrixXd Y = solver.eigenvectors().middleCols(1, dim);
    // Fix each eigenvector's sign so the result does not depend on the solver.
    for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        Eigen::Index arg = 0;
        Y.col(c).cwiseAbs().maxCoeff(&arg);
        if (Y(arg, c) < 0.0) Y.col(c) *= -1.0;
    }
    const double max_abs = Y.cwiseAbs().maxCoeff();
    if (max_abs > 0.0) Y *= 10.0 / max_abs;
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) += 1e-4 * detail::standard_normal(rng);
    return Y;
}

double clip(double v) {
    return std::clamp(v, -4.0, 4.0);
}

}  // namespace

Eigen::MatrixXd umap_reduce(const Eigen::MatrixXd& X, const UmapConfig& config) {
    const auto n = static_cast<std::size_t>(X.rows());
    const int dim = config.n_components;
    if (dim < 1) throw ConfigError("umap: n_components must be >= 1");
    if (config.n_neighbors < 2) throw ConfigError("umap: n_neighbors must be >= 2");
    if (n < 2) return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), dim);

    const int k = std::min<int>(config.n_neighbors - 1, static_cast<int>(n) - 1);
    const auto knn = exact_knn(X, k, config.metric);
    auto graph = fuzzy_simplicial_set(knn, n);
    const auto [a, b] = fit_ab(config.spread, config.min_dist);
    auto rng = detail::make_rng({config.seed, 0x554D4150});

    const int n_epochs = config.n_epochs > 0 ? config.n_epochs : (n <= 10000 ? 500 : 200);

    Eigen::MatrixXd Y;
    if (n <= 1000 && n > static_cast<std::size_t>(dim) + 1 && count_components(graph, n) == 1) {
        Y = spectral_init(graph, n, dim, rng);
    } else {
        Y.resize(static_cast<Eigen::Index>(n), dim);
        for (Eigen::Index i = 0; i < Y.size(); ++i) Y(i) = -10.0 + 20.0 * detail::uniform01(rng);
    }

    const double w_max = *std::max_element(graph.weight.begin(), graph.weight.end());
    std::vector<int> head;
    std::vector<int> tail;
    std::vector<double> eps;  // epochs per sample
    for (std::size_t e = 0; e < graph.weight.size(); ++e) {
        if (graph.weight[e] < w_max / n_epochs) continue;
        head.push_back(graph.head[e]);
        tail.push_back(graph.tail[e]);
        eps.push_back(w_max / graph.weight[e]);
    }
    const double neg_rate = config.negative_sample_rate;
    std::vector<double> next_sample = eps;
    std::vector<double> eps_neg(eps.size());
    for (std::size_t e = 0; e < eps.size(); ++e) eps_neg[e] = eps[e] / neg_rate;
    std::vector<double> next_neg = eps_neg;

    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const double alpha = config.learning_rate * (1.0 - static_cast<double>(epoch) / n_epochs);
        for (std::size_t e = 0; e < head.size(); ++e) {
            if (next_sample[e] > epoch) continue;
            const int j = head[e];
            const int t = tail[e];
            double d2 = (Y.row(j) - Y.row(t)).squaredNorm();
            double coeff = 0.0;
            if (d2 > 0.0) coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
            for (int c = 0; c < dim; ++c) {
                const double g = clip(coeff * (Y(j, c) - Y(t, c)));
                Y(j, c) += g * alpha;
                Y(t, c) -= g * alpha;
            }
            next_sample[e] += eps[e];

            const auto n_neg = static_cast<int>((epoch - next_neg[e]) / eps_neg[e]);
            for (int p = 0; p < n_neg; ++p) {
                const auto o = static_cast<Eigen::Index>(detail::uniform_index(rng, n));
                if (o == j) continue;
                d2 = (Y.row(j) - Y.row(o)).squaredNorm();
                coeff = d2 > 0.0 ? 2.0 * b / ((0.001 + d2) * (a * std::pow(d2, b) + 1.0)) : 0.0;
                for (int c = 0; c < dim; ++c) {
                    const double g = coeff > 0.0 ? clip(coeff * (Y(j, c) - Y(o, c))) : 4.0;
                    Y(j, c) += g * alpha;
                }
            }
            next_neg[e] += n_neg * eps_neg[e];
        }
    }
    return Y;
}

}  // namespace topicbench::models
