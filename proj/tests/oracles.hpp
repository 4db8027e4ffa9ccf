#pragma once

// Brute-force reference computations used only by tests. Each routine takes
// a different (slower, more literal) route than the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

// Two-sided Wilcoxon p-value by walking all 2^n sign patterns and counting
// those whose smaller signed-rank sum is at most the observed one.
inline double wilcoxon_enumerated_p(const std::vector<double>& diffs) {
    std::vector<double> nz;
    for (double d : diffs) {
        if (d != 0.0) nz.push_back(d);
    }
    const std::size_t n = nz.size();
    // Mid-ranks of |d| by counting: rank = (#smaller) + (#equal + 1) / 2.
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        double smaller = 0, equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::fabs(nz[j]) < std::fabs(nz[i])) smaller += 1;
            if (std::fabs(nz[j]) == std::fabs(nz[i])) equal += 1;
        }
        ranks[i] = smaller + (equal + 1.0) / 2.0;
    }
    const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    double observed_plus = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (nz[i] > 0) observed_plus += ranks[i];
    }
    const double observed = std::min(observed_plus, total - observed_plus);
    std::uint64_t extreme = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double plus = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (std::uint64_t{1} << i)) plus += ranks[i];
        }
        if (std::min(plus, total - plus) <= observed + 1e-9) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(patterns);
}

// Friedman statistic from a table of ranks (no ties assumed).
inline double friedman_chi2_from_ranks(const std::vector<std::vector<int>>& ranks) {
    const double n = static_cast<double>(ranks.size());
    const double k = static_cast<double>(ranks.front().size());
    std::vector<double> sums(ranks.front().size(), 0.0);
    for (const auto& row : ranks)
        for (std::size_t j = 0; j < row.size(); ++j) sums[j] += row[j];
    double ss = 0;
    for (double s : sums) ss += s * s;
    return 12.0 / (n * k * (k + 1)) * ss - 3 * n * (k + 1);
}

// Exact Friedman p by enumerating every combination of per-block rank
// permutations (k! ^ n tables).
inline double friedman_enumerated_p(const std::vector<std::vector<int>>& observed) {
    const std::size_t n = observed.size();
    const std::size_t k = observed.front().size();
    std::vector<std::vector<int>> perms;
    std::vector<int> p(k);
    std::iota(p.begin(), p.end(), 1);
    do {
        perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    const double stat = friedman_chi2_from_ranks(observed);
    std::vector<std::size_t> idx(n, 0);
    std::uint64_t hits = 0, total = 0;
    while (true) {
        std::vector<std::vector<int>> table;
        for (std::size_t b = 0; b < n; ++b) table.push_back(perms[idx[b]]);
        ++total;
        if (friedman_chi2_from_ranks(table) >= stat - 1e-9) ++hits;
        std::size_t b = 0;
        while (b < n && ++idx[b] == perms.size()) {
            idx[b] = 0;
            ++b;
        }
        if (b == n) break;
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// Sums of squares via raw moments rather than deviations from group means.
struct SumsOfSquares {
    double between;
    double within;
};

inline SumsOfSquares anova_raw_moments(const std::vector<std::vector<double>>& groups) {
    double sum = 0, sum_sq = 0, n = 0, between_raw = 0;
    for (const auto& g : groups) {
        double gs = 0;
        for (double v : g) {
            gs += v;
            sum_sq += v * v;
        }
        sum += gs;
        n += static_cast<double>(g.size());
        between_raw += gs * gs / static_cast<double>(g.size());
    }
    const double correction = sum * sum / n;
    return {between_raw - correction, sum_sq - between_raw};
}

}  // namespace oracle
