#pragma once

// Per-dataset results for twelve subreddit datasets (LDA, NMF, BERTopic), as
// published alongside their Mean / Minimum / Maximum summary rows.

#include <array>
#include <string>
#include <vector>

namespace benchmark_tables {

struct PublishedSummary {
    // Printed values and the number of decimals they were printed with.
    double mean, min, max;
    int decimals;
};

struct Table {
    std::string name;
    std::vector<double> lda, nmf, bertopic;
    std::array<PublishedSummary, 3> summary;  // LDA, NMF, BERTopic
};

inline const std::vector<std::string> kDatasets = {
    "disabledgamers", "MachineLearning", "HermanCainAward", "cybersecurity",
    "emergencymedicine", "SustainableFashion", "LanguageTechnology", "nutrition",
    "uwaterloo", "Coronavirus", "bipolar", "CoronavirusCanada"};

inline const Table kNumberOfTopics{
    "number_of_topics",
    {10, 10, 40, 35, 30, 15, 30, 10, 15, 10, 45, 10},
    {5, 5, 40, 5, 50, 10, 20, 5, 10, 10, 10, 15},
    {22, 56, 131, 142, 20, 35, 78, 27, 43, 133, 56, 62},
    {{{22, 10, 45, 0}, {15, 5, 50, 0}, {67, 20, 142, 0}}}};

inline const Table kCoherence{
    "coherence",
    {0.494, 0.475, 0.456, 0.520, 0.460, 0.386, 0.474, 0.543, 0.507, 0.564, 0.543, 0.584},
    {0.667, 0.721, 0.544, 0.714, 0.527, 0.573, 0.599, 0.849, 0.706, 0.748, 0.819, 0.746},
    {0.639, 0.649, 0.575, 0.687, 0.623, 0.685, 0.596, 0.683, 0.695, 0.683, 0.573, 0.670},
    {{{0.500, 0.386, 0.584, 3}, {0.684, 0.527, 0.849, 3}, {0.647, 0.573, 0.695, 3}}}};

inline const Table kDiversity{
    "diversity",
    {0.680, 0.770, 0.723, 0.751, 0.673, 0.653, 0.700, 0.800, 0.773, 0.750, 0.727, 0.800},
    {0.920, 0.880, 0.828, 0.900, 0.796, 0.880, 0.900, 0.900, 0.870, 0.920, 0.920, 0.920},
    {0.967, 1.000, 0.990, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 1.000, 0.992, 1.000},
    {{{0.733, 0.653, 0.800, 3}, {0.866, 0.796, 0.920, 3}, {0.995, 0.967, 1.000, 3}}}};

inline const Table kKlDivergence{
    "kl_divergence",
    {0.020, 0.095, 0.109, 0.093, 0.048, 0.125, 0.144, 0.027, 0.194, 0.032, 0.066, 0.136},
    {7.956, 8.397, 10.166, 9.479, 11.766, 11.042, 9.607, 7.298, 8.856, 9.981, 10.475, 9.277},
    {0.004, 0.003, 0.027, 0.002, 0.014, 0.012, 0.001, 0.003, 0.013, 0.002, 0.001, 0.004},
    // NMF mean printed with two decimals, the rest with three.
    {{{0.090, 0.020, 0.194, 3}, {9.52, 7.298, 11.766, 2}, {0.007, 0.001, 0.027, 3}}}};

inline const Table kExecutionTime{
    "execution_time",
    {280, 1329, 3178, 933, 452, 200, 1034, 333, 531, 1575, 730, 1587},
    {51, 74, 836, 136, 101, 53, 62, 68, 56, 91, 88, 180},
    {173, 701, 2891, 1190, 274, 153, 408, 599, 262, 767, 653, 1178},
    {{{1013, 200, 3178, 0}, {149, 51, 836, 0}, {771, 153, 2891, 0}}}};

inline const std::vector<const Table*> kAll = {&kNumberOfTopics, &kCoherence, &kDiversity,
                                               &kKlDivergence, &kExecutionTime};

inline std::vector<std::vector<double>> groups(const Table& t) {
    return {t.lda, t.nmf, t.bertopic};
}

inline const std::vector<std::string> kMethods = {"LDA", "NMF", "BERTopic"};

}  // namespace benchmark_tables
