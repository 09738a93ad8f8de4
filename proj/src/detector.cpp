#include "tiledrop/detector.hpp"

#include "tiledrop/errors.hpp"
#include "tiledrop/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace tiledrop {

namespace {

constexpr std::uint64_t kDetectKey = 0x444554454354ULL;

}  // namespace

DetectorConfig default_detector_config()
{
    return DetectorConfig{{0.85}, {0.01}, 0};
}

void DetectorConfig::validate(int num_classes) const
{
    if (recall.empty() || fp_rate.empty()) {
        throw ConfigError("detector: recall and fp_rate must be non-empty");
    }
    if (num_classes > 0) {
        const auto l = static_cast<std::size_t>(num_classes);
        if ((recall.size() != 1 && recall.size() != l) || (fp_rate.size() != 1 && fp_rate.size() != l)) {
            throw ConfigError("detector: per-class vectors must have 1 or L entries");
        }
    }
    for (double r : recall) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("detector: recall must be in (0, 1]");
    }
    for (double f : fp_rate) {
        if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("detector: fp_rate must be finite and >= 0");
    }
}

ClassCounts detect(const Tile& tile, int grid, std::size_t k, const DetectorConfig& cfg)
{
    const auto& truth = tile.subtiles.at(k).truth;
    const auto tile_index = static_cast<std::uint64_t>(tile.row * grid + tile.col);
    ClassCounts out(truth.size());
    for (std::size_t c = 0; c < truth.size(); ++c) {
        KeyedRng rng{kDetectKey, cfg.seed, static_cast<std::uint64_t>(tile.cluster_id), tile_index, k, c};
        Count found = truth[c];
        const double recall = cfg.recall_for(c);
        if (recall < 1.0 && found > 0) {
            std::binomial_distribution<Count> hits(found, recall);
            found = hits(rng);
        }
        const double fp = cfg.fp_rate_for(c);
        if (fp > 0.0) {
            std::poisson_distribution<Count> false_pos(fp);
            found += false_pos(rng);
        }
        out[c] = found;
    }
    return out;
}

ClassCounts gated_counts(const Tile& tile, int grid, const ActionVector& actions, const DetectorConfig& cfg)
{
    if (actions.size() != tile.subtiles.size()) {
        throw std::invalid_argument("gated_counts: action length differs from subtile count");
    }
    ClassCounts out(tile.subtiles.empty() ? 0 : tile.subtiles.front().truth.size());
    for (std::size_t k = 0; k < actions.size(); ++k) {
        if (actions[k]) {
            out += detect(tile, grid, k, cfg);
        }
    }
    return out;
}

ClassCounts reference_counts(const Tile& tile, int grid, const DetectorConfig& cfg)
{
    return gated_counts(tile, grid, ActionVector(tile.subtiles.size(), true), cfg);
}

DetectionTable::DetectionTable(const World& world, const DetectorConfig& cfg)
    : num_classes_(world.num_classes()),
      num_subtiles_(world.num_subtiles()),
      tiles_per_cluster_(world.grid() * world.grid())
{
    cfg.validate(num_classes_);
    const int g = world.grid();
    subtiles_.reserve(world.clusters.size() * static_cast<std::size_t>(tiles_per_cluster_ * num_subtiles_));
    reference_.reserve(world.clusters.size() * static_cast<std::size_t>(tiles_per_cluster_));
    for (const auto& cl : world.clusters) {
        for (const auto& tile : cl.tiles) {
            ClassCounts ref(static_cast<std::size_t>(num_classes_));
            for (std::size_t k = 0; k < static_cast<std::size_t>(num_subtiles_); ++k) {
                subtiles_.push_back(detect(tile, g, k, cfg));
                ref += subtiles_.back();
            }
            reference_.push_back(std::move(ref));
        }
    }
}

std::size_t DetectionTable::index(int cluster, int tile) const
{
    return static_cast<std::size_t>(cluster) * static_cast<std::size_t>(tiles_per_cluster_) + static_cast<std::size_t>(tile);
}

const ClassCounts& DetectionTable::subtile(int cluster, int tile, std::size_t k) const
{
    return subtiles_[index(cluster, tile) * static_cast<std::size_t>(num_subtiles_) + k];
}

const ClassCounts& DetectionTable::reference(int cluster, int tile) const
{
    return reference_[index(cluster, tile)];
}

ClassCounts DetectionTable::gated(int cluster, int tile, const ActionVector& actions) const
{
    if (actions.size() != static_cast<std::size_t>(num_subtiles_)) {
        throw std::invalid_argument("gated: action length differs from subtile count");
    }
    ClassCounts out(static_cast<std::size_t>(num_classes_));
    for (std::size_t k = 0; k < actions.size(); ++k) {
        if (actions[k]) {
            out += subtile(cluster, tile, k);
        }
    }
    return out;
}

}  // namespace tiledrop
