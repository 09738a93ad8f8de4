#pragma once

#include "tiledrop/counts.hpp"
#include "tiledrop/worldgen.hpp"

#include <cstdint>
#include <vector>

namespace tiledrop {

// Noisy object-count oracle standing in for a trained detector. Each true
// object is found with probability recall[c]; false positives arrive as
// Poisson(fp_rate[c]) per subtile.
struct DetectorConfig {
    std::vector<double> recall;   // per class, in (0, 1]; one entry broadcasts
    std::vector<double> fp_rate;  // per class, >= 0; one entry broadcasts
    std::uint64_t seed = 0;

    static DetectorConfig perfect(std::uint64_t seed = 0) { return {{1.0}, {0.0}, seed}; }

    [[nodiscard]] double recall_for(std::size_t c) const { return recall.size() == 1 ? recall[0] : recall[c]; }
    [[nodiscard]] double fp_rate_for(std::size_t c) const { return fp_rate.size() == 1 ? fp_rate[0] : fp_rate[c]; }
    // Throws ConfigError. num_classes checks per-class vector lengths.
    void validate(int num_classes) const;
};

DetectorConfig default_detector_config();

// Detected counts for subtile `k` of `tile`. Keyed by
// (seed, cluster, tile, subtile, class), so repeated calls agree exactly.
ClassCounts detect(const Tile& tile, int grid, std::size_t k, const DetectorConfig& cfg);

// Counts from acquired subtiles only; unacquired subtiles contribute zero.
ClassCounts gated_counts(const Tile& tile, int grid, const ActionVector& actions, const DetectorConfig& cfg);

// Detector output over every subtile. The reward target.
ClassCounts reference_counts(const Tile& tile, int grid, const DetectorConfig& cfg);

// Precomputed detector outputs for a whole world. Identical to calling
// detect() per subtile, but O(1) per lookup.
class DetectionTable {
public:
    DetectionTable() = default;
    DetectionTable(const World& world, const DetectorConfig& cfg);

    [[nodiscard]] const ClassCounts& subtile(int cluster, int tile, std::size_t k) const;
    [[nodiscard]] const ClassCounts& reference(int cluster, int tile) const;
    [[nodiscard]] ClassCounts gated(int cluster, int tile, const ActionVector& actions) const;

    [[nodiscard]] int num_subtiles() const { return num_subtiles_; }
    [[nodiscard]] int num_classes() const { return num_classes_; }

private:
    std::size_t index(int cluster, int tile) const;

    int num_classes_ = 0;
    int num_subtiles_ = 0;
    int tiles_per_cluster_ = 0;
    std::vector<ClassCounts> subtiles_;   // [cluster][tile][subtile]
    std::vector<ClassCounts> reference_;  // [cluster][tile]
};

}  // namespace tiledrop
