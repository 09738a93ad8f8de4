#include "tiledrop/trainer.hpp"

#include "tiledrop/csv.hpp"
#include "tiledrop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace tiledrop {

namespace {

// Fixed reduction block; independent of the worker count so sums are
// bit-identical for any --threads.
constexpr std::size_t kBlock = 64;
constexpr std::uint64_t kShuffleKey = 0x5348554646ULL;
constexpr std::uint64_t kBatchKey = 0x4241544348ULL;

void add_into(std::vector<double>& acc, const std::vector<double>& g, double scale)
{
    for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] += scale * g[i];
    }
}

template <typename Fn>
void parallel_blocks(std::size_t n_blocks, int threads, Fn&& fn)
{
    const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(std::max<std::size_t>(n_blocks, 1))));
    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t b = w; b < n_blocks; b += workers) fn(b);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

void TrainConfig::validate() const
{
    auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
    if (epochs < 0) fail("epochs must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be >= 0");
    if (!(alpha_start >= 0.5 && alpha_start <= alpha_end && alpha_end <= 1.0)) {
        fail("need 0.5 <= alpha_start <= alpha_end <= 1");
    }
    if (hidden < 1) fail("hidden must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        fail("adam moments need beta in [0, 1) and eps > 0");
    }
    if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
    if (threads < 1) fail("threads must be >= 1");
}

double alpha_schedule(int epoch, int total_epochs, double alpha_start, double alpha_end)
{
    if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
        throw std::invalid_argument("alpha_schedule: epoch out of range");
    }
    if (total_epochs == 1) {
        return alpha_end;
    }
    return alpha_start + (alpha_end - alpha_start) * static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
}

RolloutPair rollout(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha, KeyedRng& rng)
{
    const Tile& tile = env.tile(ref);
    const ActionProbs s = temperature_scale(forward(params, tile.lr_features), alpha);
    const ClassCounts& v_ref = env.detections->reference(ref.cluster, ref.tile);

    RolloutPair out;
    auto fill = [&](Episode& ep, ActionVector a) {
        ep.tile = ref;
        ep.s_scaled = s;
        ep.actions = std::move(a);
        ep.v_hat = env.detections->gated(ref.cluster, ref.tile, ep.actions);
        ep.reward = reward(ep.v_hat, v_ref, ep.actions, env.lambda);
    };
    fill(out.sampled, sample_actions(s, rng));
    fill(out.greedy, greedy_actions(s));
    return out;
}

double advantage(const Episode& sampled, const Episode& greedy)
{
    return sampled.reward.total - greedy.reward.total;
}

std::vector<double> tree_reduce(std::vector<std::vector<double>> parts)
{
    if (parts.empty()) {
        return {};
    }
    while (parts.size() > 1) {
        std::vector<std::vector<double>> next;
        next.reserve((parts.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
            add_into(parts[i], parts[i + 1], 1.0);
            next.push_back(std::move(parts[i]));
        }
        if (parts.size() % 2 == 1) {
            next.push_back(std::move(parts.back()));
        }
        parts = std::move(next);
    }
    return std::move(parts.front());
}

std::vector<double> batch_gradient(const RolloutEnv& env, std::span<const TileRef> tiles, const PolicyParams& params,
                                   double alpha, std::uint64_t key, int threads, Baseline baseline, BatchStats* stats)
{
    if (tiles.empty()) {
        throw std::invalid_argument("batch_gradient: empty batch");
    }
    const std::size_t n_blocks = (tiles.size() + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(params.size(), 0.0));
    std::vector<BatchStats> block_stats(n_blocks);

    parallel_blocks(n_blocks, threads, [&](std::size_t b) {
        const std::size_t end = std::min(tiles.size(), (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) {
            KeyedRng rng{key, static_cast<std::uint64_t>(i)};
            const auto pair = rollout(env, tiles[i], params, alpha, rng);
            const double adv = baseline == Baseline::SelfCritical ? advantage(pair.sampled, pair.greedy)
                                                                  : pair.sampled.reward.total;
            if (adv != 0.0) {
                const auto g = grad_log_likelihood(params, env.tile(tiles[i]).lr_features, pair.sampled.actions, alpha);
                add_into(partial[b], g, adv);
            }
            auto& st = block_stats[b];
            st.sum_reward += pair.sampled.reward.total;
            st.sum_abs_advantage += std::abs(advantage(pair.sampled, pair.greedy));
            st.sum_l1_gap += -pair.sampled.reward.accuracy;
            st.acquired += pair.sampled.actions.acquired();
            st.subtiles += pair.sampled.actions.size();
            st.episodes += 1;
        }
    });

    auto grad = tree_reduce(std::move(partial));
    const double inv_n = 1.0 / static_cast<double>(tiles.size());
    for (auto& v : grad) {
        v *= inv_n;
    }
    if (stats != nullptr) {
        for (const auto& st : block_stats) {
            stats->sum_reward += st.sum_reward;
            stats->sum_abs_advantage += st.sum_abs_advantage;
            stats->sum_l1_gap += st.sum_l1_gap;
            stats->acquired += st.acquired;
            stats->subtiles += st.subtiles;
            stats->episodes += st.episodes;
        }
    }
    return grad;
}

std::vector<double> exact_policy_gradient(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha,
                                          double baseline)
{
    const int s = params.num_subtiles;
    if (s > 12) {
        throw std::invalid_argument("exact_policy_gradient: S > 12 is too large to enumerate");
    }
    const Tile& tile = env.tile(ref);
    const ActionProbs probs = temperature_scale(forward(params, tile.lr_features), alpha);
    const ClassCounts& v_ref = env.detections->reference(ref.cluster, ref.tile);
    std::vector<double> grad(params.size(), 0.0);
    for (unsigned mask = 0; mask < (1u << s); ++mask) {
        ActionVector a(static_cast<std::size_t>(s));
        for (int k = 0; k < s; ++k) {
            a.a[static_cast<std::size_t>(k)] = (mask >> k) & 1u;
        }
        const double pi = std::exp(log_likelihood(probs, a));
        const double r = reward(env.detections->gated(ref.cluster, ref.tile, a), v_ref, a, env.lambda).total;
        add_into(grad, grad_log_likelihood(params, tile.lr_features, a, alpha), pi * (r - baseline));
    }
    return grad;
}

double expected_reward(const RolloutEnv& env, TileRef ref, const PolicyParams& params, double alpha)
{
    const int s = params.num_subtiles;
    if (s > 12) {
        throw std::invalid_argument("expected_reward: S > 12 is too large to enumerate");
    }
    const Tile& tile = env.tile(ref);
    const ActionProbs probs = temperature_scale(forward(params, tile.lr_features), alpha);
    const ClassCounts& v_ref = env.detections->reference(ref.cluster, ref.tile);
    double total = 0.0;
    for (unsigned mask = 0; mask < (1u << s); ++mask) {
        ActionVector a(static_cast<std::size_t>(s));
        for (int k = 0; k < s; ++k) {
            a.a[static_cast<std::size_t>(k)] = (mask >> k) & 1u;
        }
        total += std::exp(log_likelihood(probs, a)) *
                 reward(env.detections->gated(ref.cluster, ref.tile, a), v_ref, a, env.lambda).total;
    }
    return total;
}

void update_step(PolicyParams& params, std::span<const double> gradient, OptimizerState& state, const TrainConfig& cfg)
{
    if (gradient.size() != params.size()) {
        throw std::invalid_argument("update_step: gradient shape differs from params");
    }
    for (double g : gradient) {
        if (!std::isfinite(g)) {
            throw TrainingError("update_step: non-finite gradient");
        }
    }
    std::vector<double> next = params.theta;
    if (cfg.optimizer == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] += cfg.learning_rate * gradient[i];
        }
    } else {
        if (state.m.size() != next.size()) {
            state.m.assign(next.size(), 0.0);
            state.v.assign(next.size(), 0.0);
            state.step = 0;
        }
        state.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
        for (std::size_t i = 0; i < next.size(); ++i) {
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gradient[i];
            state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gradient[i] * gradient[i];
            const double m_hat = state.m[i] / bc1;
            const double v_hat = state.v[i] / bc2;
            next[i] += cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
    for (double v : next) {
        if (!std::isfinite(v)) {
            throw TrainingError("update_step: non-finite parameter after update");
        }
    }
    params.theta = std::move(next);
}

std::vector<TileRef> tiles_of(const World& world, std::span<const int> cluster_ids)
{
    std::vector<TileRef> out;
    const int per_cluster = world.grid() * world.grid();
    out.reserve(cluster_ids.size() * static_cast<std::size_t>(per_cluster));
    for (int id : cluster_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= world.clusters.size()) {
            throw std::out_of_range("tiles_of: cluster id out of range");
        }
        for (int t = 0; t < per_cluster; ++t) {
            out.push_back({id, t});
        }
    }
    return out;
}

TrainResult train(const World& world, std::span<const int> train_ids, const DetectorConfig& detector,
                  const TrainConfig& cfg, const CheckpointSink& on_checkpoint)
{
    cfg.validate();
    if (train_ids.empty()) {
        throw std::invalid_argument("train: no training clusters");
    }
    TrainResult result;
    result.params = init_params(world.num_features(), cfg.hidden, world.num_subtiles(), cfg.seed);
    if (cfg.epochs == 0) {
        return result;
    }

    const DetectionTable detections(world, detector);
    const RolloutEnv env{&world, &detections, cfg.lambda};
    const std::vector<TileRef> all_tiles = tiles_of(world, train_ids);
    OptimizerState opt;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double alpha = alpha_schedule(epoch, cfg.epochs, cfg.alpha_start, cfg.alpha_end);
        std::vector<TileRef> order = all_tiles;
        KeyedRng shuffle{cfg.seed, kShuffleKey, static_cast<std::uint64_t>(epoch)};
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::swap(order[i], order[shuffle.below(i + 1)]);
        }

        BatchStats stats;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
            const std::size_t len = std::min(batch, order.size() - start);
            const std::uint64_t key = hash_key({cfg.seed, kBatchKey, static_cast<std::uint64_t>(epoch), batch_index});
            const auto grad = batch_gradient(env, std::span(order).subspan(start, len), result.params, alpha, key,
                                             cfg.threads, Baseline::SelfCritical, &stats);
            try {
                update_step(result.params, grad, opt, cfg);
            } catch (const TrainingError& e) {
                throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ": " +
                                    e.what());
            }
        }

        const double n = static_cast<double>(stats.episodes);
        result.history.epochs.push_back(EpochRecord{
            epoch, stats.sum_reward / n, stats.sum_abs_advantage / n,
            static_cast<double>(stats.acquired) / static_cast<double>(stats.subtiles), stats.sum_l1_gap / n, alpha});

        const bool last = epoch + 1 == cfg.epochs;
        if (on_checkpoint && (last || (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0))) {
            on_checkpoint(Checkpoint{result.params, alpha, epoch + 1, cfg.seed, {}});
        }
    }
    return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path, const std::string& config_hash)
{
    std::string out = csv_row({"epoch", "mean_reward", "acq_fraction", "mean_l1_gap", "alpha", "mean_abs_advantage",
                               "config_hash"});
    for (const auto& r : history.epochs) {
        out += csv_row({std::to_string(r.epoch), format_double(r.mean_reward), format_double(r.acquisition_fraction),
                        format_double(r.mean_l1_gap), format_double(r.alpha), format_double(r.mean_abs_advantage),
                        config_hash});
    }
    write_text_file(path, out);
}

}  // namespace tiledrop
