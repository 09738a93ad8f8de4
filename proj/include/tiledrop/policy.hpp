#pragma once

#include "tiledrop/counts.hpp"
#include "tiledrop/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace tiledrop {

inline constexpr double kProbClamp = 1e-6;
inline constexpr int kCheckpointSchemaVersion = 1;

// One-hidden-layer perceptron: x -> tanh(W1 x + b1) -> sigmoid(W2 h + b2).
// theta layout: W1 (H x F, row-major), b1 (H), W2 (S x H, row-major), b2 (S).
struct PolicyParams {
    int num_features = 0;  // F
    int hidden = 0;        // H
    int num_subtiles = 0;  // S
    std::vector<double> theta;

    static std::size_t expected_size(int f, int h, int s)
    {
        return static_cast<std::size_t>(h) * (f + 1) + static_cast<std::size_t>(s) * (h + 1);
    }
    [[nodiscard]] std::size_t size() const { return theta.size(); }

    [[nodiscard]] std::size_t w1_offset() const { return 0; }
    [[nodiscard]] std::size_t b1_offset() const { return static_cast<std::size_t>(hidden) * num_features; }
    [[nodiscard]] std::size_t w2_offset() const { return b1_offset() + hidden; }
    [[nodiscard]] std::size_t b2_offset() const { return w2_offset() + static_cast<std::size_t>(num_subtiles) * hidden; }

    void validate() const;
    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

// Acquisition probabilities, one per subtile.
struct ActionProbs {
    std::vector<double> s;
    [[nodiscard]] std::size_t size() const { return s.size(); }
};

// Glorot-uniform weights, zero biases.
PolicyParams init_params(int num_features, int hidden, int num_subtiles, std::uint64_t seed);
PolicyParams zero_params(int num_features, int hidden, int num_subtiles);

// Clamped to (kProbClamp, 1 - kProbClamp). Throws std::invalid_argument on
// non-finite or wrongly sized input.
ActionProbs forward(const PolicyParams& params, std::span<const double> features);

// alpha * s + (1 - alpha) * (1 - s); alpha in [0.5, 1].
ActionProbs temperature_scale(const ActionProbs& probs, double alpha);

ActionVector sample_actions(const ActionProbs& probs, KeyedRng& rng);

// a_k = 1 iff s_k > 0.5.
ActionVector greedy_actions(const ActionProbs& probs);

double log_likelihood(const ActionProbs& probs, const ActionVector& actions);

// d/dtheta of log pi(a | temperature_scale(forward(x), alpha)). Components
// whose probability hit the clamp contribute zero.
std::vector<double> grad_log_likelihood(const PolicyParams& params, std::span<const double> features,
                                        const ActionVector& actions, double alpha);

struct Checkpoint {
    PolicyParams params;
    double alpha_at_save = 1.0;
    int epoch = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

}  // namespace tiledrop
