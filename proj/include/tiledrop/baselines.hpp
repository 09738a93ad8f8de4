#pragma once

#include "tiledrop/counts.hpp"
#include "tiledrop/policy.hpp"
#include "tiledrop/rng.hpp"
#include "tiledrop/worldgen.hpp"

#include <span>
#include <string>
#include <vector>

namespace tiledrop {

// Per-tile acquisition decisions for one cluster, row-major.
struct SelectionMask {
    int grid = 0;
    int num_subtiles = 0;
    std::vector<ActionVector> tiles;

    static SelectionMask empty(int grid, int num_subtiles);
    static SelectionMask full(int grid, int num_subtiles);
    // Whole tiles (all S subtiles) for the listed row-major indices.
    static SelectionMask from_tiles(int grid, int num_subtiles, std::span<const int> tile_indices);

    [[nodiscard]] std::size_t acquired_subtiles() const;
    [[nodiscard]] std::size_t acquired_tiles() const;  // tiles with any subtile acquired
    [[nodiscard]] double fraction() const;
    [[nodiscard]] std::vector<int> selected_tiles() const;
    friend bool operator==(const SelectionMask&, const SelectionMask&) = default;
};

// ceil(fraction * G^2) with a small tolerance against representation error.
int tile_budget(int grid, double fraction);

SelectionMask no_dropping(const Cluster& cluster, int num_subtiles);

// Nearest tiles to the grid center by Chebyshev distance, ties row-major.
SelectionMask fixed_policy(const Cluster& cluster, int num_subtiles, double fraction);

SelectionMask random_policy(const Cluster& cluster, int num_subtiles, double fraction, KeyedRng& rng);

// Successive weighted draws without replacement, weight exp(-d / (G / 4))
// with d the Euclidean distance from the grid center.
SelectionMask stochastic_policy(const Cluster& cluster, int num_subtiles, double fraction, KeyedRng& rng);
std::vector<double> stochastic_weights(int grid);

// Bottom-K tiles by the greenness channel (last LR feature), ties row-major.
SelectionMask green_policy(const Cluster& cluster, int num_subtiles, int k);

// Ridge regression from LR features (plus intercept) to total true tile counts.
class CountsRegressor {
public:
    CountsRegressor() = default;
    static CountsRegressor fit(const World& world, std::span<const int> train_ids, double ridge = 1e-3);

    [[nodiscard]] double predict(std::span<const double> features) const;
    [[nodiscard]] const std::vector<double>& coefficients() const { return coef_; }  // intercept last

private:
    std::vector<double> coef_;
};

SelectionMask counts_pred_policy(const CountsRegressor& model, const Cluster& cluster, int num_subtiles, int k);
SelectionMask counts_pred_policy(const World& world, std::span<const int> train_ids, const Cluster& cluster, int k);

enum class ProxyMode { Nightlights, Settlement };

// Nightlights: every tile with proxy > 0 (k ignored). Settlement: top-K by proxy.
SelectionMask proxy_layer_policy(const Cluster& cluster, int num_subtiles, ProxyMode mode, int k);

// Greedy actions of the learned policy on every tile.
SelectionMask learned_policy_mask(const Cluster& cluster, const PolicyParams& params);

}  // namespace tiledrop
