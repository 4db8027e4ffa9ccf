#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

namespace topicbench::models {

std::vector<int> default_topic_grid();  // 5, 10, ..., 50

struct CoherenceSweep {
    int best_k = 0;
    double best_coherence = 0.0;
    std::map<int, std::optional<double>> curve;  // nullopt = grid point failed
};

/// Argmax coherence over `grid`; ties go to the smaller K. A throwing grid
/// point is skipped with a warning; if all fail, throws PipelineError.
CoherenceSweep choose_topics_by_coherence(const std::function<double(int)>& evaluate,
                                          const std::vector<int>& grid = default_topic_grid());

struct MedianSelection {
    int median = 0;
    double mean = 0.0;
    double std_dev = 0.0;  // sample standard deviation (n - 1)
    std::vector<int> counts;
    std::vector<std::uint64_t> seeds;
};

/// Runs `train(run_index, seed)` with seeds base_seed + i and returns the
/// median topic count. `runs` must be odd and >= 1.
MedianSelection choose_topics_median(const std::function<int(int, std::uint64_t)>& train, int runs = 11,
                                     std::uint64_t base_seed = 42);

void to_json(nlohmann::json& j, const CoherenceSweep& s);
void to_json(nlohmann::json& j, const MedianSelection& s);

}  // namespace topicbench::models
