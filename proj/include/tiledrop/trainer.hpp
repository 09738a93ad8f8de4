#pragma once

#include "tiledrop/detector.hpp"
#include "tiledrop/policy.hpp"
#include "tiledrop/reward.hpp"
#include "tiledrop/worldgen.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tiledrop {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
    int epochs = 300;
    int batch_size = 289;
    double learning_rate = 1e-4;
    double lambda = 1.0;
    double alpha_start = 0.6;
    double alpha_end = 0.95;
    int hidden = 16;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int checkpoint_every = 50;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

// A tile addressed inside a world, with its detector outputs precomputed.
struct TileRef {
    int cluster = 0;  // index into World::clusters
    int tile = 0;     // row-major index inside the cluster
};

// Everything a rollout needs besides the policy.
struct RolloutEnv {
    const World* world = nullptr;
    const DetectionTable* detections = nullptr;
    double lambda = 1.0;

    [[nodiscard]] const Tile& tile(TileRef ref) const
    {
        return world->clusters[static_cast<std::size_t>(ref.cluster)].tiles[static_cast<std::size_t>(ref.tile)];
    }
};

struct Episode {
    TileRef tile;
    ActionProbs s_scaled;
    ActionVector actions;
    ClassCounts v_hat;
    RewardBreakdown reward;
};

struct EpochRecord {
    int epoch = 0;
    double mean_reward = 0.0;
    double mean_abs_advantage = 0.0;
    double acquisition_fraction = 0.0;
    double mean_l1_gap = 0.0;
    double alpha = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

double alpha_schedule(int epoch, int total_epochs, double alpha_start, double alpha_end);

struct RolloutPair {
    Episode sampled;
    Episode greedy;
};

RolloutPair rollout(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha, KeyedRng& rng);

// Self-critical advantage: R(sampled) - R(greedy).
double advantage(const Episode& sampled, const Episode& greedy);

struct BatchStats {
    double sum_reward = 0.0;
    double sum_abs_advantage = 0.0;
    double sum_l1_gap = 0.0;
    std::size_t acquired = 0;
    std::size_t subtiles = 0;
    std::size_t episodes = 0;
};

enum class Baseline { SelfCritical, None };

// Mean over the batch of A * grad log pi(a). Tile i samples from
// KeyedRng{key, i}, and per-tile gradients are reduced pairwise, so the
// result is independent of `threads`.
std::vector<double> batch_gradient(const RolloutEnv& env, std::span<const TileRef> tiles, const PolicyParams& params,
                                   double alpha, std::uint64_t key, int threads = 1,
                                   Baseline baseline = Baseline::SelfCritical, BatchStats* stats = nullptr);

// Sum over all 2^S actions of pi(a) * (R(a) - b) * grad log pi(a).
// Throws std::invalid_argument for S > 12.
std::vector<double> exact_policy_gradient(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha,
                                          double baseline = 0.0);

// Expected reward sum_a pi(a) R(a) under the scaled policy.
double expected_reward(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha);

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
};

// Gradient ascent. Throws TrainingError on non-finite gradient or result.
void update_step(PolicyParams& params, std::span<const double> gradient, OptimizerState& state,
                 const TrainConfig& cfg);

// Pairwise-tree sum of equally sized vectors.
std::vector<double> tree_reduce(std::vector<std::vector<double>> parts);

using CheckpointSink = std::function<void(const Checkpoint&)>;

struct TrainResult {
    PolicyParams params;
    TrainHistory history;
};

TrainResult train(const World& world, std::span<const int> train_ids, const DetectorConfig& detector,
                  const TrainConfig& cfg, const CheckpointSink& on_checkpoint = {});

// All tiles of the given clusters, cluster-major.
std::vector<TileRef> tiles_of(const World& world, std::span<const int> cluster_ids);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       const std::string& config_hash = {});

}  // namespace tiledrop
