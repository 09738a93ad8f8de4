#include "tiledrop/baselines.hpp"

#include "tiledrop/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tiledrop {

namespace {

void check_fraction(double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("selection fraction must be in (0, 1]");
    }
}

void check_k(int k, int grid)
{
    if (k < 0 || k > grid * grid) {
        throw std::invalid_argument("selection K must be in [0, G^2]");
    }
}

// Stable ordering of tile indices by key; equal keys keep row-major order.
template <typename Key>
std::vector<int> order_by(int n, Key key)
{
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return key(a) < key(b); });
    return idx;
}

SelectionMask first_k(const std::vector<int>& order, int k, int grid, int num_subtiles)
{
    return SelectionMask::from_tiles(grid, num_subtiles, std::span(order).first(static_cast<std::size_t>(k)));
}

}  // namespace

SelectionMask SelectionMask::empty(int grid, int num_subtiles)
{
    return SelectionMask{grid, num_subtiles,
                         std::vector<ActionVector>(static_cast<std::size_t>(grid * grid),
                                                   ActionVector(static_cast<std::size_t>(num_subtiles), false))};
}

SelectionMask SelectionMask::full(int grid, int num_subtiles)
{
    return SelectionMask{grid, num_subtiles,
                         std::vector<ActionVector>(static_cast<std::size_t>(grid * grid),
                                                   ActionVector(static_cast<std::size_t>(num_subtiles), true))};
}

SelectionMask SelectionMask::from_tiles(int grid, int num_subtiles, std::span<const int> tile_indices)
{
    SelectionMask m = empty(grid, num_subtiles);
    for (int t : tile_indices) {
        m.tiles.at(static_cast<std::size_t>(t)) = ActionVector(static_cast<std::size_t>(num_subtiles), true);
    }
    return m;
}

std::size_t SelectionMask::acquired_subtiles() const
{
    std::size_t n = 0;
    for (const auto& a : tiles) n += a.acquired();
    return n;
}

std::size_t SelectionMask::acquired_tiles() const
{
    return static_cast<std::size_t>(std::count_if(tiles.begin(), tiles.end(), [](const ActionVector& a) { return a.acquired() > 0; }));
}

double SelectionMask::fraction() const
{
    const double total = static_cast<double>(tiles.size()) * num_subtiles;
    return total > 0 ? static_cast<double>(acquired_subtiles()) / total : 0.0;
}

std::vector<int> SelectionMask::selected_tiles() const
{
    std::vector<int> out;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        if (tiles[t].acquired() > 0) out.push_back(static_cast<int>(t));
    }
    return out;
}

int tile_budget(int grid, double fraction)
{
    check_fraction(fraction);
    const int n = grid * grid;
    return std::clamp(static_cast<int>(std::ceil(fraction * n - 1e-9)), 1, n);
}

SelectionMask no_dropping(const Cluster& cluster, int num_subtiles)
{
    return SelectionMask::full(cluster.grid, num_subtiles);
}

SelectionMask fixed_policy(const Cluster& cluster, int num_subtiles, double fraction)
{
    const int g = cluster.grid;
    const double center = (g - 1) / 2.0;
    const auto order = order_by(g * g, [&](int t) {
        return std::max(std::abs(t / g - center), std::abs(t % g - center));
    });
    return first_k(order, tile_budget(g, fraction), g, num_subtiles);
}

SelectionMask random_policy(const Cluster& cluster, int num_subtiles, double fraction, KeyedRng& rng)
{
    const int g = cluster.grid;
    const int k = tile_budget(g, fraction);
    std::vector<int> idx(static_cast<std::size_t>(g * g));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    return first_k(idx, k, g, num_subtiles);
}

std::vector<double> stochastic_weights(int grid)
{
    const double center = (grid - 1) / 2.0;
    const double sigma = grid / 4.0;
    std::vector<double> w(static_cast<std::size_t>(grid * grid));
    for (int t = 0; t < grid * grid; ++t) {
        const double dr = t / grid - center;
        const double dc = t % grid - center;
        w[static_cast<std::size_t>(t)] = std::exp(-std::sqrt(dr * dr + dc * dc) / sigma);
    }
    return w;
}

SelectionMask stochastic_policy(const Cluster& cluster, int num_subtiles, double fraction, KeyedRng& rng)
{
    const int g = cluster.grid;
    const int k = tile_budget(g, fraction);
    auto weights = stochastic_weights(g);
    std::vector<int> chosen;
    for (int draw = 0; draw < k; ++draw) {
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        double u = rng.uniform() * total;
        std::size_t pick = weights.size();
        for (std::size_t t = 0; t < weights.size(); ++t) {
            if (weights[t] <= 0.0) continue;
            pick = t;
            if (u < weights[t]) break;
            u -= weights[t];
        }
        chosen.push_back(static_cast<int>(pick));
        weights[pick] = 0.0;
    }
    return SelectionMask::from_tiles(g, num_subtiles, chosen);
}

SelectionMask green_policy(const Cluster& cluster, int num_subtiles, int k)
{
    const int g = cluster.grid;
    check_k(k, g);
    const auto order = order_by(g * g, [&](int t) { return cluster.tiles[static_cast<std::size_t>(t)].lr_features.back(); });
    return first_k(order, k, g, num_subtiles);
}

CountsRegressor CountsRegressor::fit(const World& world, std::span<const int> train_ids, double ridge)
{
    if (train_ids.empty()) {
        throw std::invalid_argument("CountsRegressor: no training clusters");
    }
    const int f = world.num_features();
    const int per_cluster = world.grid() * world.grid();
    const auto rows = static_cast<Eigen::Index>(train_ids.size()) * per_cluster;
    Eigen::MatrixXd x(rows, f + 1);
    Eigen::VectorXd y(rows);
    Eigen::Index r = 0;
    for (int id : train_ids) {
        for (const auto& tile : world.clusters.at(static_cast<std::size_t>(id)).tiles) {
            for (int j = 0; j < f; ++j) {
                x(r, j) = tile.lr_features[static_cast<std::size_t>(j)];
            }
            x(r, f) = 1.0;
            y(r) = static_cast<double>(tile.total_truth().total());
            ++r;
        }
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    for (int j = 0; j < f; ++j) {
        gram(j, j) += ridge;
    }
    const Eigen::VectorXd beta = gram.ldlt().solve(x.transpose() * y);
    CountsRegressor out;
    out.coef_.assign(beta.data(), beta.data() + beta.size());
    return out;
}

double CountsRegressor::predict(std::span<const double> features) const
{
    if (features.size() + 1 != coef_.size()) {
        throw std::invalid_argument("CountsRegressor: feature length mismatch");
    }
    double v = coef_.back();
    for (std::size_t j = 0; j < features.size(); ++j) {
        v += coef_[j] * features[j];
    }
    return v;
}

SelectionMask counts_pred_policy(const CountsRegressor& model, const Cluster& cluster, int num_subtiles, int k)
{
    const int g = cluster.grid;
    check_k(k, g);
    std::vector<double> pred(cluster.tiles.size());
    for (std::size_t t = 0; t < pred.size(); ++t) {
        pred[t] = model.predict(cluster.tiles[t].lr_features);
    }
    const auto order = order_by(g * g, [&](int t) { return -pred[static_cast<std::size_t>(t)]; });
    return first_k(order, k, g, num_subtiles);
}

SelectionMask counts_pred_policy(const World& world, std::span<const int> train_ids, const Cluster& cluster, int k)
{
    return counts_pred_policy(CountsRegressor::fit(world, train_ids), cluster, world.num_subtiles(), k);
}

SelectionMask proxy_layer_policy(const Cluster& cluster, int num_subtiles, ProxyMode mode, int k)
{
    const int g = cluster.grid;
    if (mode == ProxyMode::Nightlights) {
        std::vector<int> lit;
        for (int t = 0; t < g * g; ++t) {
            if (cluster.proxy_layer[static_cast<std::size_t>(t)] > 0.0) lit.push_back(t);
        }
        return SelectionMask::from_tiles(g, num_subtiles, lit);
    }
    check_k(k, g);
    const auto order = order_by(g * g, [&](int t) { return -cluster.proxy_layer[static_cast<std::size_t>(t)]; });
    return first_k(order, k, g, num_subtiles);
}

SelectionMask learned_policy_mask(const Cluster& cluster, const PolicyParams& params)
{
    SelectionMask m = SelectionMask::empty(cluster.grid, params.num_subtiles);
    for (std::size_t t = 0; t < cluster.tiles.size(); ++t) {
        m.tiles[t] = greedy_actions(forward(params, cluster.tiles[t].lr_features));
    }
    return m;
}

}  // namespace tiledrop
