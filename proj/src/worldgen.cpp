#include "tiledrop/worldgen.hpp"

#include "tiledrop/errors.hpp"
#include "tiledrop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace tiledrop {

namespace {

constexpr double kLatMin = -1.4;
constexpr double kLatMax = 4.2;
constexpr double kLonMin = 29.6;
constexpr double kLonMax = 35.0;
constexpr double kSmoothSelf = 0.7;
constexpr std::uint64_t kMixingKey = 0x4d4958494e47ULL;

enum Stream : std::uint64_t { kLayout = 0, kCounts = 1, kFeatures = 2, kProxy = 3, kOutcome = 4 };

struct Bump {
    double row = 0.0;
    double col = 0.0;
    double sigma = 1.0;
    std::vector<double> class_weight;
};

// Subtile centers as offsets inside a unit tile. Square S uses a sqrt(S)
// sub-grid, anything else a row of vertical strips.
std::vector<std::pair<double, double>> subtile_offsets(int s)
{
    std::vector<std::pair<double, double>> out;
    const int q = static_cast<int>(std::lround(std::sqrt(static_cast<double>(s))));
    if (q * q == s) {
        for (int k = 0; k < s; ++k) {
            out.emplace_back((k / q + 0.5) / q, (k % q + 0.5) / q);
        }
    } else {
        for (int k = 0; k < s; ++k) {
            out.emplace_back(0.5, (k + 0.5) / s);
        }
    }
    return out;
}

std::int64_t poisson(double mean, KeyedRng& rng)
{
    if (!(mean > 0.0)) {
        return 0;
    }
    std::poisson_distribution<std::int64_t> dist(mean);
    return dist(rng);
}

// 0.7 * own + 0.3 * mean of in-grid 4-neighbours.
std::vector<double> smooth(const std::vector<double>& field, int g)
{
    std::vector<double> out(field.size());
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            double sum = 0.0;
            int n = 0;
            const int dr[] = {-1, 1, 0, 0};
            const int dc[] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                const int rr = r + dr[d];
                const int cc = c + dc[d];
                if (rr >= 0 && rr < g && cc >= 0 && cc < g) {
                    sum += field[static_cast<std::size_t>(rr * g + cc)];
                    ++n;
                }
            }
            const double own = field[static_cast<std::size_t>(r * g + c)];
            out[static_cast<std::size_t>(r * g + c)] = n > 0 ? kSmoothSelf * own + (1.0 - kSmoothSelf) * sum / n : own;
        }
    }
    return out;
}

// Fixed F x L mixing map for the middle feature channels; rows sum to 1.
std::vector<std::vector<double>> mixing_map(int f, int l)
{
    std::vector<std::vector<double>> m(static_cast<std::size_t>(f), std::vector<double>(static_cast<std::size_t>(l)));
    for (int i = 0; i < f; ++i) {
        double sum = 0.0;
        for (int c = 0; c < l; ++c) {
            KeyedRng rng{kMixingKey, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(c)};
            m[i][c] = rng.uniform();
            sum += m[i][c];
        }
        for (auto& v : m[i]) {
            v /= sum;
        }
    }
    return m;
}

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v)) {
        throw GenerationError(std::string("non-finite generated value: ") + what);
    }
}

Cluster generate_cluster(const GenConfig& cfg, std::uint64_t seed, int id)
{
    const int g = cfg.grid;
    const int s = cfg.num_subtiles;
    const int l = cfg.num_classes;
    const int f = cfg.num_features;
    const auto uid = static_cast<std::uint64_t>(id);

    Cluster cl;
    cl.id = id;
    cl.grid = g;

    KeyedRng layout{seed, uid, kLayout};
    cl.lat = kLatMin + (kLatMax - kLatMin) * layout.uniform();
    cl.lon = kLonMin + (kLonMax - kLonMin) * layout.uniform();
    cl.jitter_km = cfg.max_jitter_km * layout.uniform();
    const double scale = cfg.cluster_scale_min + (cfg.cluster_scale_max - cfg.cluster_scale_min) * layout.uniform();
    const int n_bumps = cfg.bumps_min + static_cast<int>(layout.below(static_cast<std::uint64_t>(cfg.bumps_max - cfg.bumps_min + 1)));
    std::vector<Bump> bumps(static_cast<std::size_t>(n_bumps));
    for (auto& b : bumps) {
        b.row = g * layout.uniform();
        b.col = g * layout.uniform();
        b.sigma = cfg.bump_sigma_min + (cfg.bump_sigma_max - cfg.bump_sigma_min) * layout.uniform();
        b.class_weight.resize(static_cast<std::size_t>(l));
        for (auto& w : b.class_weight) {
            w = 0.5 + layout.uniform();
        }
    }

    const auto offsets = subtile_offsets(s);
    auto intensity = [&](int c, double r, double col) {
        double v = cfg.background[static_cast<std::size_t>(c)];
        for (const auto& b : bumps) {
            const double d2 = (r - b.row) * (r - b.row) + (col - b.col) * (col - b.col);
            v += scale * cfg.class_amplitudes[static_cast<std::size_t>(c)] * b.class_weight[static_cast<std::size_t>(c)] *
                 std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        return v;
    };

    KeyedRng count_rng{seed, uid, kCounts};
    const std::size_t n_tiles = static_cast<std::size_t>(g * g);
    cl.tiles.resize(n_tiles);
    std::vector<std::vector<double>> tile_totals(static_cast<std::size_t>(l), std::vector<double>(n_tiles));
    std::vector<double> building_intensity(n_tiles, 0.0);
    for (int r = 0; r < g; ++r) {
        for (int c = 0; c < g; ++c) {
            const std::size_t t = static_cast<std::size_t>(r * g + c);
            Tile& tile = cl.tiles[t];
            tile.cluster_id = id;
            tile.row = r;
            tile.col = c;
            tile.subtiles.resize(static_cast<std::size_t>(s));
            for (int k = 0; k < s; ++k) {
                const double pr = r + offsets[static_cast<std::size_t>(k)].first;
                const double pc = c + offsets[static_cast<std::size_t>(k)].second;
                ClassCounts truth(static_cast<std::size_t>(l));
                for (int cls = 0; cls < l; ++cls) {
                    const double mean = intensity(cls, pr, pc);
                    require_finite(mean, "intensity");
                    truth[static_cast<std::size_t>(cls)] = poisson(mean, count_rng);
                    tile_totals[static_cast<std::size_t>(cls)][t] += static_cast<double>(truth[static_cast<std::size_t>(cls)]);
                    if (cls == 0) {
                        building_intensity[t] += mean;
                    }
                }
                tile.subtiles[static_cast<std::size_t>(k)].truth = std::move(truth);
            }
        }
    }

    // LR features: log of smoothed per-subtile counts, mixed and noised.
    const auto mix = mixing_map(f, l);
    std::vector<std::vector<double>> z(static_cast<std::size_t>(l));
    for (int cls = 0; cls < l; ++cls) {
        auto sm = smooth(tile_totals[static_cast<std::size_t>(cls)], g);
        for (auto& v : sm) {
            v = std::log1p(v / s);
        }
        z[static_cast<std::size_t>(cls)] = std::move(sm);
    }
    KeyedRng feature_rng{seed, uid, kFeatures};
    std::normal_distribution<double> lr_noise(0.0, 1.0);
    for (std::size_t t = 0; t < n_tiles; ++t) {
        auto& feats = cl.tiles[t].lr_features;
        feats.assign(static_cast<std::size_t>(f), 0.0);
        double mean_z = 0.0;
        for (int cls = 0; cls < l; ++cls) {
            mean_z += z[static_cast<std::size_t>(cls)][t];
        }
        feats[0] = mean_z / l;
        for (int ch = 1; ch < f - 1; ++ch) {
            double v = 0.0;
            for (int cls = 0; cls < l; ++cls) {
                v += mix[static_cast<std::size_t>(ch)][static_cast<std::size_t>(cls)] * z[static_cast<std::size_t>(cls)][t];
            }
            feats[static_cast<std::size_t>(ch)] = v;
        }
        feats[static_cast<std::size_t>(f - 1)] = 1.0 - 0.5 * z[0][t];
        for (auto& v : feats) {
            v += cfg.lr_noise * lr_noise(feature_rng);
            require_finite(v, "lr feature");
        }
    }

    KeyedRng proxy_rng{seed, uid, kProxy};
    std::normal_distribution<double> proxy_noise(0.0, 1.0);
    const auto smoothed_building = smooth(building_intensity, g);
    cl.proxy_layer.resize(n_tiles);
    for (std::size_t t = 0; t < n_tiles; ++t) {
        const double v = std::log1p(smoothed_building[t]) + cfg.proxy_noise * proxy_noise(proxy_rng);
        require_finite(v, "proxy layer");
        cl.proxy_layer[t] = std::max(0.0, v);
    }

    const ClassCounts totals = cl.total_truth();
    double y = 0.0;
    for (int cls = 0; cls < l; ++cls) {
        y += cfg.w_star[static_cast<std::size_t>(cls)] * static_cast<double>(totals[static_cast<std::size_t>(cls)]);
    }
    KeyedRng outcome_rng{seed, uid, kOutcome};
    std::normal_distribution<double> y_noise(0.0, 1.0);
    y += cfg.y_noise * y_noise(outcome_rng);
    require_finite(y, "outcome");
    cl.y = y;
    return cl;
}

}  // namespace

GenConfig GenConfig::resolved() const
{
    GenConfig out = *this;
    const auto l = static_cast<std::size_t>(std::max(num_classes, 0));
    if (out.class_amplitudes.empty()) {
        out.class_amplitudes.resize(l);
        for (std::size_t c = 0; c < l; ++c) {
            out.class_amplitudes[c] = 6.0 * std::pow(0.7, static_cast<double>(c));
        }
    }
    if (out.background.empty()) {
        out.background.assign(l, 0.002);
    }
    if (out.w_star.empty()) {
        out.w_star.resize(l);
        for (std::size_t c = 0; c < l; ++c) {
            out.w_star[c] = 0.002 * static_cast<double>(1 + c % 3);
        }
    }
    return out;
}

void GenConfig::validate() const
{
    auto fail = [](const std::string& m) { throw ConfigError("generation config: " + m); };
    if (num_classes < 1) fail("num_classes must be >= 1");
    if (num_subtiles < 1) fail("num_subtiles must be >= 1");
    if (num_features < 2) fail("num_features must be >= 2");
    if (grid < 1) fail("grid must be >= 1");
    if (num_clusters < 2) fail("num_clusters must be >= 2");
    if (bumps_min < 0 || bumps_max < bumps_min) fail("need 0 <= bumps_min <= bumps_max");
    if (!(bump_sigma_min > 0.0) || bump_sigma_max < bump_sigma_min) fail("need 0 < bump_sigma_min <= bump_sigma_max");
    if (!(cluster_scale_min >= 0.0) || cluster_scale_max < cluster_scale_min) fail("need 0 <= cluster_scale_min <= cluster_scale_max");
    const auto l = static_cast<std::size_t>(num_classes);
    auto check_vec = [&](const std::vector<double>& v, const char* name, bool nonneg) {
        if (!v.empty() && v.size() != l) fail(std::string(name) + " must have num_classes entries");
        for (double x : v) {
            if (!std::isfinite(x) || (nonneg && x < 0.0)) fail(std::string(name) + " entries must be finite" + (nonneg ? " and >= 0" : ""));
        }
    };
    check_vec(class_amplitudes, "class_amplitudes", true);
    check_vec(background, "background", true);
    check_vec(w_star, "w_star", false);
    for (double noise : {lr_noise, proxy_noise, y_noise}) {
        if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise scales must be finite and >= 0");
    }
    if (!(max_jitter_km >= 0.0) || max_jitter_km > 5.0) fail("max_jitter_km must be in [0, 5]");
}

bool operator==(const GenConfig& a, const GenConfig& b)
{
    return a.num_classes == b.num_classes && a.num_subtiles == b.num_subtiles && a.num_features == b.num_features &&
           a.grid == b.grid && a.num_clusters == b.num_clusters && a.bumps_min == b.bumps_min &&
           a.bumps_max == b.bumps_max && a.bump_sigma_min == b.bump_sigma_min && a.bump_sigma_max == b.bump_sigma_max &&
           a.cluster_scale_min == b.cluster_scale_min && a.cluster_scale_max == b.cluster_scale_max &&
           a.class_amplitudes == b.class_amplitudes && a.background == b.background && a.w_star == b.w_star &&
           a.lr_noise == b.lr_noise && a.proxy_noise == b.proxy_noise && a.y_noise == b.y_noise &&
           a.max_jitter_km == b.max_jitter_km;
}

ClassCounts Tile::total_truth() const
{
    ClassCounts out;
    for (const auto& st : subtiles) {
        out += st.truth;
    }
    return out;
}

ClassCounts Cluster::total_truth() const
{
    ClassCounts out;
    for (const auto& t : tiles) {
        out += t.total_truth();
    }
    return out;
}

World generate_world(const GenConfig& config, std::uint64_t seed, int threads)
{
    config.validate();
    World world;
    world.config = config.resolved();
    world.seed = seed;
    const int n = world.config.num_clusters;
    world.clusters.resize(static_cast<std::size_t>(n));

    const int workers = std::clamp(threads, 1, n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i) {
            world.clusters[static_cast<std::size_t>(i)] = generate_cluster(world.config, seed, i);
        }
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int i = w; i < n; i += workers) {
                        world.clusters[static_cast<std::size_t>(i)] = generate_cluster(world.config, seed, i);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return world;
}

void validate_world(const World& world)
{
    auto fail = [](const std::string& m) { throw ValidationError("world: " + m); };
    const auto& cfg = world.config;
    const auto l = static_cast<std::size_t>(cfg.num_classes);
    const auto s = static_cast<std::size_t>(cfg.num_subtiles);
    const auto f = static_cast<std::size_t>(cfg.num_features);
    const int g = cfg.grid;
    if (world.clusters.size() != static_cast<std::size_t>(cfg.num_clusters)) fail("cluster count differs from N");
    if (world.clusters.size() < 2) fail("need at least 2 clusters");
    if (cfg.w_star.size() != l) fail("w_star length differs from L");
    for (const auto& cl : world.clusters) {
        if (cl.grid != g) fail("cluster grid differs from G");
        if (cl.tiles.size() != static_cast<std::size_t>(g * g)) fail("tile count differs from G^2");
        if (cl.proxy_layer.size() != cl.tiles.size()) fail("proxy layer size differs from G^2");
        if (!std::isfinite(cl.y)) fail("non-finite y");
        if (cl.jitter_km < 0.0 || cl.jitter_km > 5.0) fail("jitter_km outside [0, 5]");
        for (double p : cl.proxy_layer) {
            if (!std::isfinite(p) || p < 0.0) fail("proxy layer entries must be finite and >= 0");
        }
        for (std::size_t t = 0; t < cl.tiles.size(); ++t) {
            const auto& tile = cl.tiles[t];
            if (tile.row < 0 || tile.row >= g || tile.col < 0 || tile.col >= g ||
                static_cast<std::size_t>(tile.row * g + tile.col) != t) {
                fail("tile grid index out of place");
            }
            if (tile.cluster_id != cl.id) fail("tile cluster id mismatch");
            if (tile.lr_features.size() != f) fail("lr_features length differs from F");
            for (double v : tile.lr_features) {
                if (!std::isfinite(v)) fail("non-finite lr feature");
            }
            if (tile.subtiles.size() != s) fail("subtile count differs from S");
            for (const auto& st : tile.subtiles) {
                if (st.truth.size() != l) fail("class count length differs from L");
                for (auto c : st.truth.values) {
                    if (c < 0) fail("negative count");
                }
            }
        }
    }
}

Split split_train_test(int num_clusters, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("test_fraction must be in (0, 1)");
    }
    if (num_clusters * test_fraction < 1.0) {
        throw ConfigError("test split would be empty");
    }
    const int n_test = static_cast<int>(std::ceil(num_clusters * test_fraction - 1e-9));
    if (n_test >= num_clusters) {
        throw ConfigError("train split would be empty");
    }
    std::vector<int> ids(static_cast<std::size_t>(num_clusters));
    std::iota(ids.begin(), ids.end(), 0);
    KeyedRng rng{seed, 0x53504c4954ULL};
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        std::swap(ids[i], ids[rng.below(i + 1)]);
    }
    Split out;
    out.test.assign(ids.begin(), ids.begin() + n_test);
    out.train.assign(ids.begin() + n_test, ids.end());
    std::sort(out.test.begin(), out.test.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

}  // namespace tiledrop
