#include "support.hpp"

#include "tiledrop/baselines.hpp"
#include "tiledrop/detector.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <utility>

using namespace tiledrop;

namespace {

Cluster blank_cluster(int grid, int features = 3, int subtiles = 4)
{
    Cluster c;
    c.grid = grid;
    for (int t = 0; t < grid * grid; ++t) {
        Tile tile;
        tile.row = t / grid;
        tile.col = t % grid;
        tile.subtiles.assign(static_cast<std::size_t>(subtiles), SubTile{ClassCounts(2)});
        tile.lr_features.assign(static_cast<std::size_t>(features), 0.0);
        c.tiles.push_back(tile);
    }
    c.proxy_layer.assign(static_cast<std::size_t>(grid * grid), 0.0);
    return c;
}

std::set<std::pair<int, int>> cells(const SelectionMask& m)
{
    std::set<std::pair<int, int>> out;
    for (int t : m.selected_tiles()) out.insert({t / m.grid, t % m.grid});
    return out;
}

bool whole_tiles(const SelectionMask& m)
{
    for (const auto& a : m.tiles)
        if (a.acquired() != 0 && a.acquired() != a.size()) return false;
    return true;
}

// Sort-based oracle: indices of the k smallest keys, ties by index.
std::set<int> smallest_k(const std::vector<double>& keys, int k)
{
    std::vector<std::pair<double, int>> v;
    for (int i = 0; i < static_cast<int>(keys.size()); ++i) v.push_back({keys[static_cast<std::size_t>(i)], i});
    std::sort(v.begin(), v.end());
    std::set<int> out;
    for (int i = 0; i < k; ++i) out.insert(v[static_cast<std::size_t>(i)].second);
    return out;
}

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("selection mask basics and tile budget")
{
    const auto full = SelectionMask::full(8, 4);
    CHECK(full.fraction() == 1.0);
    CHECK(full.acquired_subtiles() == 256);
    CHECK(SelectionMask::empty(8, 4).fraction() == 0.0);
    const std::vector<int> some{0, 5, 63};
    const auto m = SelectionMask::from_tiles(8, 4, some);
    CHECK(m.fraction() == 3.0 / 64.0);
    CHECK(m.selected_tiles() == some);
    CHECK(m.acquired_tiles() == 3);

    CHECK(tile_budget(8, 0.18) == 12);
    CHECK(tile_budget(8, 0.25) == 16);
    CHECK(tile_budget(3, 1.0 / 9.0) == 1);
    CHECK(tile_budget(8, 1e-6) == 1);
    CHECK_THROWS(tile_budget(8, 0.0));
    CHECK_THROWS(tile_budget(8, 1.5));
}

TEST_CASE("no dropping matches full gated counts")
{
    const World w = generate_world(testsupport::small_config(2), 4);
    const auto cfg = default_detector_config();
    const auto& cl = w.clusters[1];
    const auto m = no_dropping(cl, w.num_subtiles());
    CHECK(m.fraction() == 1.0);
    for (std::size_t t = 0; t < cl.tiles.size(); ++t) {
        CHECK(gated_counts(cl.tiles[t], w.grid(), m.tiles[t], cfg) == reference_counts(cl.tiles[t], w.grid(), cfg));
    }
}

TEST_CASE("fixed policy")
{
    const auto g8 = blank_cluster(8);
    const auto m = fixed_policy(g8, 4, 0.18);
    const std::set<std::pair<int, int>> expected{{3, 3}, {3, 4}, {4, 3}, {4, 4}, {2, 2}, {2, 3},
                                                 {2, 4}, {2, 5}, {3, 2}, {3, 5}, {4, 2}, {4, 5}};
    CHECK(cells(m) == expected);
    CHECK(whole_tiles(m));
    CHECK(fixed_policy(g8, 4, 1.0) == SelectionMask::full(8, 4));

    const auto g3 = blank_cluster(3);
    CHECK(cells(fixed_policy(g3, 4, 1.0 / 9.0)) == std::set<std::pair<int, int>>{{1, 1}});
}

TEST_CASE("random policy")
{
    const auto cl = blank_cluster(8);
    KeyedRng a{5}, b{5};
    CHECK(random_policy(cl, 4, 0.25, a) == random_policy(cl, 4, 0.25, b));

    std::vector<int> hits(64, 0);
    constexpr int kSeeds = 10000;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        KeyedRng rng{s, 0x77};
        const auto m = random_policy(cl, 4, 0.25, rng);
        CHECK(m.acquired_tiles() == 16);
        CHECK(whole_tiles(m));
        for (int t : m.selected_tiles()) ++hits[static_cast<std::size_t>(t)];
    }
    for (int h : hits) CHECK(std::abs(static_cast<double>(h) / kSeeds - 0.25) < 0.02);
}

TEST_CASE("stochastic policy against an independent weighted-sampling simulation")
{
    const int g = 8;
    const auto cl = blank_cluster(g);
    const auto weights = stochastic_weights(g);
    // Center tiles carry the largest weight.
    const double wmax = *std::max_element(weights.begin(), weights.end());
    CHECK(weights[3 * 8 + 3] == wmax);
    CHECK(weights[4 * 8 + 4] == wmax);

    // Oracle: weighted sampling without replacement via keys u^(1/w),
    // keeping the k largest. Weights recomputed here from the definition.
    std::vector<double> w(64);
    for (int t = 0; t < 64; ++t) {
        const double dr = t / g - 3.5, dc = t % g - 3.5;
        w[static_cast<std::size_t>(t)] = std::exp(-std::sqrt(dr * dr + dc * dc) / 2.0);
    }
    constexpr int kDraws = 20000;
    const int k = tile_budget(g, 0.25);
    std::vector<double> oracle(64, 0.0), ours(64, 0.0);
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int d = 0; d < kDraws; ++d) {
        std::vector<std::pair<double, int>> keys;
        for (int t = 0; t < 64; ++t) keys.push_back({std::pow(unif(gen), 1.0 / w[static_cast<std::size_t>(t)]), t});
        std::partial_sort(keys.begin(), keys.begin() + k, keys.end(), std::greater<>());
        for (int i = 0; i < k; ++i) oracle[static_cast<std::size_t>(keys[static_cast<std::size_t>(i)].second)] += 1.0 / kDraws;

        KeyedRng rng{static_cast<std::uint64_t>(d), 0x5354};
        const auto m = stochastic_policy(cl, 4, 0.25, rng);
        REQUIRE(m.acquired_tiles() == static_cast<std::size_t>(k));
        for (int t : m.selected_tiles()) ours[static_cast<std::size_t>(t)] += 1.0 / kDraws;
    }
    for (int t = 0; t < 64; ++t) CHECK(std::abs(ours[static_cast<std::size_t>(t)] - oracle[static_cast<std::size_t>(t)]) < 0.03);
    CHECK(ours[27] >= *std::max_element(ours.begin(), ours.end()) - 0.03);
}

TEST_CASE("green policy")
{
    auto cl = blank_cluster(4, 3);
    std::vector<double> green(16);
    KeyedRng rng{12};
    for (std::size_t t = 0; t < 16; ++t) {
        green[t] = rng.uniform();
        cl.tiles[t].lr_features.back() = green[t];
    }
    CHECK(green_policy(cl, 4, 16) == SelectionMask::full(4, 4));
    const auto argmin = static_cast<int>(std::min_element(green.begin(), green.end()) - green.begin());
    CHECK(green_policy(cl, 4, 1).selected_tiles() == std::vector<int>{argmin});
    for (int k = 0; k <= 16; ++k) CHECK(as_set(green_policy(cl, 4, k).selected_tiles()) == smallest_k(green, k));
    CHECK_THROWS(green_policy(cl, 4, 17));
}

TEST_CASE("counts-pred policy recovers the truth ordering on a linear world")
{
    // Tile totals are an exact linear function of the LR features.
    World w;
    w.config.num_classes = 2;
    w.config.num_subtiles = 4;
    w.config.num_features = 3;
    w.config.grid = 4;
    KeyedRng rng{77};
    for (int c = 0; c < 5; ++c) {
        Cluster cl = blank_cluster(4, 3);
        cl.id = c;
        for (auto& tile : cl.tiles) {
            const Count total = static_cast<Count>(rng.below(40));
            tile.subtiles[0].truth = ClassCounts{std::vector<Count>{total, 0}};
            const double noise_free = static_cast<double>(rng.below(7));
            tile.lr_features = {static_cast<double>(total) / 2.0 + 3.0 * noise_free, noise_free, 1.0 + rng.uniform()};
        }
        w.clusters.push_back(cl);
    }
    const std::vector<int> train_ids{0, 1, 2, 3};
    const auto model = CountsRegressor::fit(w, train_ids, 1e-9);
    // total = 2 * f0 - 6 * f1; third feature and intercept carry nothing.
    const auto& beta = model.coefficients();
    REQUIRE(beta.size() == 4);
    CHECK(beta[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(beta[1] == doctest::Approx(-6.0).epsilon(1e-6));
    CHECK(std::abs(beta[2]) < 1e-6);
    CHECK(std::abs(beta[3]) < 1e-6);

    const auto& test = w.clusters[4];
    std::vector<double> neg_truth;
    for (const auto& t : test.tiles) neg_truth.push_back(-static_cast<double>(t.total_truth().total()));
    for (int k : {1, 3, 6}) {
        // Only compare where the k-th and (k+1)-th truth values differ.
        auto sorted = neg_truth;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[static_cast<std::size_t>(k - 1)] == sorted[static_cast<std::size_t>(k)]) continue;
        CHECK(as_set(counts_pred_policy(model, test, 4, k).selected_tiles()) == smallest_k(neg_truth, k));
    }
    CHECK(counts_pred_policy(w, train_ids, test, 5) == counts_pred_policy(w, train_ids, test, 5));
}

TEST_CASE("counts-pred regressor matches an independent normal-equation solve")
{
    const World w = generate_world(testsupport::small_config(3), 8);
    const std::vector<int> ids{0, 1, 2};
    const double ridge = 1e-3;
    const auto model = CountsRegressor::fit(w, ids, ridge);

    // Gram system with unpenalised intercept, solved by Gauss-Jordan.
    const std::size_t p = static_cast<std::size_t>(w.num_features()) + 1;
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (int id : ids) {
        for (const auto& t : w.clusters[static_cast<std::size_t>(id)].tiles) {
            std::vector<double> x = t.lr_features;
            x.push_back(1.0);
            const double y = static_cast<double>(t.total_truth().total());
            for (std::size_t i = 0; i < p; ++i) {
                for (std::size_t j = 0; j < p; ++j) a[i][j] += x[i] * x[j];
                a[i][p] += x[i] * y;
            }
        }
    }
    for (std::size_t i = 0; i + 1 < p; ++i) a[i][i] += ridge;
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= p; ++c) a[r][c] -= f * a[col][c];
        }
    }
    for (std::size_t i = 0; i < p; ++i) CHECK(model.coefficients()[i] == doctest::Approx(a[i][p] / a[i][i]).epsilon(1e-8));
}

TEST_CASE("proxy layer policies")
{
    auto cl = blank_cluster(4);
    CHECK(proxy_layer_policy(cl, 4, ProxyMode::Nightlights, 0) == SelectionMask::empty(4, 4));
    CHECK(proxy_layer_policy(cl, 4, ProxyMode::Settlement, 16) == SelectionMask::full(4, 4));

    const std::vector<double> proxy{0, 0.5, 0, 2.0, 0, 0, 1.5, 0, 0.1, 0, 0, 0, 0, 3.0, 0, 0};
    cl.proxy_layer = proxy;
    CHECK(proxy_layer_policy(cl, 4, ProxyMode::Nightlights, 0).selected_tiles() == std::vector<int>{1, 3, 6, 8, 13});
    std::vector<double> neg;
    for (double v : proxy) neg.push_back(-v);
    for (int k = 0; k <= 5; ++k) {
        CHECK(as_set(proxy_layer_policy(cl, 4, ProxyMode::Settlement, k).selected_tiles()) == smallest_k(neg, k));
    }
    // Ties among zero-proxy tiles resolve row-major.
    CHECK(proxy_layer_policy(cl, 4, ProxyMode::Settlement, 6).selected_tiles() == std::vector<int>{0, 1, 3, 6, 8, 13});
}

TEST_CASE("learned policy mask uses greedy actions per tile")
{
    const World w = generate_world(testsupport::small_config(2), 2);
    const auto p = init_params(w.num_features(), 5, w.num_subtiles(), 3);
    const auto m = learned_policy_mask(w.clusters[0], p);
    for (std::size_t t = 0; t < m.tiles.size(); ++t) {
        CHECK(m.tiles[t] == greedy_actions(forward(p, w.clusters[0].tiles[t].lr_features)));
    }
}
