#pragma once

#include "tiledrop/counts.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tiledrop {

inline constexpr int kWorldSchemaVersion = 1;

// Parameters of the synthetic settlement generator. Every field is echoed
// into the world file.
struct GenConfig {
    int num_classes = 10;    // L
    int num_subtiles = 4;    // S
    int num_features = 8;    // F; channel 0 tracks counts, channel F-1 is greenness
    int grid = 8;            // G, tiles per side
    int num_clusters = 320;  // N

    int bumps_min = 1;
    int bumps_max = 3;
    double bump_sigma_min = 0.5;  // in tile widths
    double bump_sigma_max = 1.2;
    double cluster_scale_min = 0.3;
    double cluster_scale_max = 1.5;

    // Peak expected count per subtile for each class at scale 1. Empty means
    // the default profile 6 * 0.7^c.
    std::vector<double> class_amplitudes;
    // Uniform per-subtile expected count added everywhere. Empty means 0.002.
    std::vector<double> background;
    // Index weights for y = w*.m + noise. Empty means the default profile.
    std::vector<double> w_star;

    double lr_noise = 0.2;
    double proxy_noise = 0.15;
    double y_noise = 0.1;
    double max_jitter_km = 5.0;

    // Returns a copy with empty vectors replaced by their defaults.
    [[nodiscard]] GenConfig resolved() const;
    // Throws ConfigError.
    void validate() const;
};

struct SubTile {
    ClassCounts truth;
    friend bool operator==(const SubTile&, const SubTile&) = default;
};

struct Tile {
    int cluster_id = 0;
    int row = 0;
    int col = 0;
    std::vector<SubTile> subtiles;
    std::vector<double> lr_features;

    [[nodiscard]] ClassCounts total_truth() const;
    friend bool operator==(const Tile&, const Tile&) = default;
};

struct Cluster {
    int id = 0;
    double lat = 0.0;
    double lon = 0.0;
    double jitter_km = 0.0;
    int grid = 0;
    std::vector<Tile> tiles;         // row-major, grid * grid
    std::vector<double> proxy_layer; // row-major, >= 0
    double y = 0.0;

    [[nodiscard]] const Tile& tile(int row, int col) const { return tiles[static_cast<std::size_t>(row * grid + col)]; }
    [[nodiscard]] ClassCounts total_truth() const;
    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct World {
    GenConfig config;  // resolved
    std::uint64_t seed = 0;
    std::vector<Cluster> clusters;

    [[nodiscard]] int num_classes() const { return config.num_classes; }
    [[nodiscard]] int num_subtiles() const { return config.num_subtiles; }
    [[nodiscard]] int num_features() const { return config.num_features; }
    [[nodiscard]] int grid() const { return config.grid; }
    [[nodiscard]] const std::vector<double>& w_star() const { return config.w_star; }
    friend bool operator==(const World&, const World&) = default;
};

bool operator==(const GenConfig&, const GenConfig&);

// Pure function of (config, seed). Clusters use independent keyed streams,
// so the result does not depend on `threads`.
World generate_world(const GenConfig& config, std::uint64_t seed, int threads = 1);

// Checks every structural invariant of a world. Throws ValidationError.
void validate_world(const World& world);

void save_world(const World& world, const std::filesystem::path& path);
World load_world(const std::filesystem::path& path);

// Text form used by save_world; exposed for hashing and tests.
std::string serialize_world(const World& world);
World parse_world(const std::string& text);

struct Split {
    std::vector<int> train;
    std::vector<int> test;
};

// Partitions cluster ids 0..N-1. The test side holds ceil(N * test_fraction).
Split split_train_test(int num_clusters, double test_fraction, std::uint64_t seed);
inline Split split_train_test(const World& world, double test_fraction, std::uint64_t seed)
{
    return split_train_test(static_cast<int>(world.clusters.size()), test_fraction, seed);
}

}  // namespace tiledrop
