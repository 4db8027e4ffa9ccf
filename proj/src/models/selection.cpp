#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "topicbench/error.hpp"
#include "topicbench/selection.hpp"

namespace topicbench::models {

using nlohmann::json;

std::vector<int> default_topic_grid() {
    std::vector<int> grid;
    for (int k = 5; k <= 50; k += 5) grid.push_back(k);
    return grid;
}

CoherenceSweep choose_topics_by_coherence(const std::function<double(int)>& evaluate, const std::vector<int>& grid) {
    if (grid.empty()) throw ConfigError("coherence sweep: empty grid");
    CoherenceSweep out;
    bool any = false;
    std::vector<int> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const int k : sorted) {
        try {
            const double c = evaluate(k);
            if (!std::isfinite(c)) throw ValidationError("non-finite coherence");
            out.curve[k] = c;
            // Ascending grid plus strict comparison sends ties to the smaller K.
            if (!any || c > out.best_coherence) {
                out.best_k = k;
                out.best_coherence = c;
                any = true;
            }
        } catch (const std::exception& e) {
            spdlog::warn("coherence sweep: K={} skipped: {}", k, e.what());
            out.curve[k] = std::nullopt;
        }
    }
    if (!any) throw PipelineError("select", "every grid point failed");
    return out;
}

MedianSelection choose_topics_median(const std::function<int(int, std::uint64_t)>& train, int runs,
                                     std::uint64_t base_seed) {
    if (runs < 1 || runs % 2 == 0) throw ConfigError("median selection: runs must be odd and >= 1");
    MedianSelection out;
    for (int i = 0; i < runs; ++i) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        try {
            out.counts.push_back(train(i, seed));
        } catch (const std::exception& e) {
            throw PipelineError("select", "median run " + std::to_string(i) + " (seed " + std::to_string(seed) +
                                              ") failed: " + e.what());
        }
        out.seeds.push_back(seed);
    }
    std::vector<int> sorted = out.counts;
    std::nth_element(sorted.begin(), sorted.begin() + runs / 2, sorted.end());
    out.median = sorted[static_cast<std::size_t>(runs / 2)];
    double sum = 0.0;
    for (const int c : out.counts) sum += c;
    out.mean = sum / runs;
    double ss = 0.0;
    for (const int c : out.counts) ss += (c - out.mean) * (c - out.mean);
    out.std_dev = runs > 1 ? std::sqrt(ss / (runs - 1)) : 0.0;
    return out;
}

void to_json(json& j, const CoherenceSweep& s) {
    json curve = json::array();
    for (const auto& [k, c] : s.curve) {
        curve.push_back({{"k", k}, {"coherence", c ? json(*c) : json(nullptr)}});
    }
    j = json{{"best_k", s.best_k}, {"best_coherence", s.best_coherence}, {"curve", curve}};
}

void to_json(json& j, const MedianSelection& s) {
    j = json{{"median", s.median}, {"mean", s.mean}, {"std_dev", s.std_dev}, {"counts", s.counts},
             {"seeds", s.seeds}};
}

}  // namespace topicbench::models
