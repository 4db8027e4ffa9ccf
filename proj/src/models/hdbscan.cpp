#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"

namespace topicbench::models {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double distance(const Eigen::MatrixXd& X, Eigen::Index i, Eigen::Index j, Metric metric) {
    if (metric == Metric::Euclidean) return (X.row(i) - X.row(j)).norm();
    const double ni = X.row(i).norm();
    const double nj = X.row(j).norm();
    if (ni == 0.0 || nj == 0.0) return 1.0;
    return std::max(0.0, 1.0 - X.row(i).dot(X.row(j)) / (ni * nj));
}

struct Edge {
    int a;
    int b;
    double w;
};

// Prim's algorithm on the implicit complete mutual-reachability graph.
std::vector<Edge> mutual_reachability_mst(const Eigen::MatrixXd& X, const std::vector<double>& core, Metric metric) {
    const auto n = static_cast<int>(X.rows());
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n), kInf);
    std::vector<int> from(static_cast<std::size_t>(n), -1);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n) - 1);
    int current = 0;
    in_tree[0] = 1;
    for (int step = 1; step < n; ++step) {
        int next = -1;
        double next_w = kInf;
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            const double d = distance(X, current, j, metric);
            const double mr = std::max({d, core[static_cast<std::size_t>(current)], core[static_cast<std::size_t>(j)]});
            if (mr < best[static_cast<std::size_t>(j)]) {
                best[static_cast<std::size_t>(j)] = mr;
                from[static_cast<std::size_t>(j)] = current;
            }
            if (best[static_cast<std::size_t>(j)] < next_w) {
                next_w = best[static_cast<std::size_t>(j)];
                next = j;
            }
        }
        in_tree[static_cast<std::size_t>(next)] = 1;
        edges.push_back(Edge{from[static_cast<std::size_t>(next)], next, next_w});
        current = next;
    }
    return edges;
}

struct Merge {
    int left;
    int right;
    double distance;
    int size;
};

// Single-linkage dendrogram: merge i creates node n + i.
std::vector<Merge> single_linkage(std::vector<Edge> mst, int n) {
    std::stable_sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) { return x.w < y.w; });
    std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<int> size(static_cast<std::size_t>(2 * n - 1), 1);
    const auto find = [&](int x) {
        int root = x;
        while (parent[static_cast<std::size_t>(root)] != root) root = parent[static_cast<std::size_t>(root)];
        while (parent[static_cast<std::size_t>(x)] != root) {
            const int nx = parent[static_cast<std::size_t>(x)];
            parent[static_cast<std::size_t>(x)] = root;
            x = nx;
        }
        return root;
    };
    std::vector<Merge> merges;
    merges.reserve(mst.size());
    int next = n;
    for (const auto& e : mst) {
        const int ra = find(e.a);
        const int rb = find(e.b);
        const int s = size[static_cast<std::size_t>(ra)] + size[static_cast<std::size_t>(rb)];
        merges.push_back(Merge{ra, rb, e.w, s});
        parent[static_cast<std::size_t>(ra)] = next;
        parent[static_cast<std::size_t>(rb)] = next;
        size[static_cast<std::size_t>(next)] = s;
        ++next;
    }
    return merges;
}

struct CondensedEntry {
    int parent;  // cluster id (>= n)
    int child;   // point (< n) or cluster id
    double lambda;
    int size;
};

struct Condenser {
    const std::vector<Merge>& merges;
    int n;
    int min_size;
    int next_label;
    std::vector<CondensedEntry> out;

    int node_size(int node) const { return node < n ? 1 : merges[static_cast<std::size_t>(node - n)].size; }

    void leaves(int node, std::vector<int>& acc) const {
        std::vector<int> stack{node};
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            if (x < n) {
                acc.push_back(x);
            } else {
                const auto& m = merges[static_cast<std::size_t>(x - n)];
                stack.push_back(m.right);
                stack.push_back(m.left);
            }
        }
    }

    void fall_out(int node, int label, double lambda) {
        std::vector<int> pts;
        leaves(node, pts);
        for (const int p : pts) out.push_back(CondensedEntry{label, p, lambda, 1});
    }

    // Walks the dendrogram below `node`, which currently carries `label`.
    void run(int root) {
        std::vector<std::pair<int, int>> stack{{root, next_label++}};
        while (!stack.empty()) {
            const auto [node, label] = stack.back();
            stack.pop_back();
            if (node < n) continue;
            const auto& m = merges[static_cast<std::size_t>(node - n)];
            const double lambda = m.distance > 0.0 ? 1.0 / m.distance : kInf;
            const int ls = node_size(m.left);
            const int rs = node_size(m.right);
            if (ls >= min_size && rs >= min_size) {
                const int l_label = next_label++;
                const int r_label = next_label++;
                out.push_back(CondensedEntry{label, l_label, lambda, ls});
                out.push_back(CondensedEntry{label, r_label, lambda, rs});
                stack.emplace_back(m.right, r_label);
                stack.emplace_back(m.left, l_label);
            } else if (ls < min_size && rs < min_size) {
                fall_out(m.left, label, lambda);
                fall_out(m.right, label, lambda);
            } else if (ls < min_size) {
                fall_out(m.left, label, lambda);
                stack.emplace_back(m.right, label);
            } else {
                fall_out(m.right, label, lambda);
                stack.emplace_back(m.left, label);
            }
        }
    }
};

}  // namespace

HdbscanResult hdbscan(const Eigen::MatrixXd& X, const HdbscanConfig& config) {
    if (config.min_cluster_size < 2) throw ConfigError("hdbscan: min_cluster_size must be >= 2");
    const auto n = static_cast<int>(X.rows());
    HdbscanResult result;
    result.labels.assign(static_cast<std::size_t>(n), kOutlier);
    result.probabilities.assign(static_cast<std::size_t>(n), 0.0);
    if (n < config.min_cluster_size || n < 2) return result;

    const int min_samples = config.min_samples > 0 ? config.min_samples : config.min_cluster_size;
    // Core distance: distance to the min_samples-th nearest point, counting the point itself.
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    if (min_samples > 1) {
        const int k = std::min(min_samples - 1, n - 1);
        const auto knn = exact_knn(X, k, config.metric);
        for (int i = 0; i < n; ++i) core[static_cast<std::size_t>(i)] = knn.distances[static_cast<std::size_t>(i)].back();
    }
    const auto merges = single_linkage(mutual_reachability_mst(X, core, config.metric), n);

    Condenser condenser{merges, n, config.min_cluster_size, n, {}};
    condenser.run(2 * n - 2);
    const auto& tree = condenser.out;
    const int root = n;
    const int n_clusters_total = condenser.next_label - n;

    // Birth lambda, stability and deepest child lambda per cluster.
    std::vector<double> birth(static_cast<std::size_t>(n_clusters_total), 0.0);
    std::vector<int> parent_of(static_cast<std::size_t>(n_clusters_total), -1);
    for (const auto& e : tree) {
        if (e.child >= n) {
            birth[static_cast<std::size_t>(e.child - n)] = e.lambda;
            parent_of[static_cast<std::size_t>(e.child - n)] = e.parent;
        }
    }
    std::vector<double> stability(static_cast<std::size_t>(n_clusters_total), 0.0);
    std::vector<double> max_lambda(static_cast<std::size_t>(n_clusters_total), 0.0);
    for (const auto& e : tree) {
        const auto c = static_cast<std::size_t>(e.parent - n);
        stability[c] += (e.lambda - birth[c]) * e.size;
        max_lambda[c] = std::max(max_lambda[c], e.lambda);
    }

    std::vector<std::vector<int>> children(static_cast<std::size_t>(n_clusters_total));
    for (int c = 1; c < n_clusters_total; ++c) {
        children[static_cast<std::size_t>(parent_of[static_cast<std::size_t>(c)] - n)].push_back(c + n);
    }
    std::vector<char> selected(static_cast<std::size_t>(n_clusters_total), 0);
    const auto deselect_subtree = [&](int c) {
        std::vector<int> stack = children[static_cast<std::size_t>(c - n)];
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            selected[static_cast<std::size_t>(x - n)] = 0;
            for (const int y : children[static_cast<std::size_t>(x - n)]) stack.push_back(y);
        }
    };
    const int first = config.allow_single_cluster ? root : root + 1;
    if (config.leaf_selection) {
        for (int c = first; c < n + n_clusters_total; ++c) {
            if (children[static_cast<std::size_t>(c - n)].empty()) selected[static_cast<std::size_t>(c - n)] = 1;
        }
    } else {
        // Children always carry larger ids than their parent.
        std::vector<double> subtree(stability);
        for (int c = n + n_clusters_total - 1; c >= first; --c) {
            const auto ci = static_cast<std::size_t>(c - n);
            double child_sum = 0.0;
            for (const int ch : children[ci]) child_sum += subtree[static_cast<std::size_t>(ch - n)];
            if (children[ci].empty() || stability[ci] >= child_sum) {
                selected[ci] = 1;
                deselect_subtree(c);
            } else {
                subtree[ci] = child_sum;
            }
        }
    }

    std::vector<int> label_of(static_cast<std::size_t>(n_clusters_total), kOutlier);
    std::vector<int> selected_ids;
    for (int c = 0; c < n_clusters_total; ++c) {
        if (selected[static_cast<std::size_t>(c)]) {
            label_of[static_cast<std::size_t>(c)] = static_cast<int>(selected_ids.size());
            selected_ids.push_back(c);
        }
    }
    for (const auto& e : tree) {
        if (e.child >= n) continue;
        int c = e.parent;
        while (c != -1 && !selected[static_cast<std::size_t>(c - n)]) c = parent_of[static_cast<std::size_t>(c - n)];
        if (c == -1) continue;
        const auto ci = static_cast<std::size_t>(c - n);
        const auto p = static_cast<std::size_t>(e.child);
        result.labels[p] = label_of[ci];
        const double ml = max_lambda[ci];
        if (ml == 0.0 || !std::isfinite(e.lambda)) {
            result.probabilities[p] = 1.0;
        } else {
            result.probabilities[p] = std::min(e.lambda, ml) / ml;
        }
    }
    result.num_clusters = static_cast<int>(selected_ids.size());
    return result;
}

}  // namespace topicbench::models
