#include "tiledrop/config.hpp"

#include "tiledrop/errors.hpp"

#include <zlib.h>

#include <fmt/format.h>

#include <set>

namespace tiledrop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* block)
{
    if (!j.is_object()) {
        throw ConfigError(std::string(block) + ": expected an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(std::string(block) + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* block)
{
    if (!j.contains(key)) {
        return;
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(block) + "." + key + ": " + e.what());
    }
}

// Accepts a scalar or an array.
std::vector<double> read_broadcast(const json& v, const char* key)
{
    try {
        if (v.is_array()) {
            return v.get<std::vector<double>>();
        }
        return {v.get<double>()};
    } catch (const json::exception& e) {
        throw ConfigError(std::string("detector.") + key + ": " + e.what());
    }
}

}  // namespace

ordered_json to_json(const GenConfig& c)
{
    ordered_json j;
    j["num_classes"] = c.num_classes;
    j["num_subtiles"] = c.num_subtiles;
    j["num_features"] = c.num_features;
    j["grid"] = c.grid;
    j["num_clusters"] = c.num_clusters;
    j["bumps_min"] = c.bumps_min;
    j["bumps_max"] = c.bumps_max;
    j["bump_sigma_min"] = c.bump_sigma_min;
    j["bump_sigma_max"] = c.bump_sigma_max;
    j["cluster_scale_min"] = c.cluster_scale_min;
    j["cluster_scale_max"] = c.cluster_scale_max;
    j["class_amplitudes"] = c.class_amplitudes;
    j["background"] = c.background;
    j["w_star"] = c.w_star;
    j["lr_noise"] = c.lr_noise;
    j["proxy_noise"] = c.proxy_noise;
    j["y_noise"] = c.y_noise;
    j["max_jitter_km"] = c.max_jitter_km;
    return j;
}

GenConfig gen_config_from_json(const json& j)
{
    static const std::set<std::string> known = {
        "num_classes", "num_subtiles", "num_features", "grid", "num_clusters", "bumps_min", "bumps_max",
        "bump_sigma_min", "bump_sigma_max", "cluster_scale_min", "cluster_scale_max", "class_amplitudes",
        "background", "w_star", "lr_noise", "proxy_noise", "y_noise", "max_jitter_km"};
    constexpr const char* block = "generation";
    reject_unknown(j, known, block);
    GenConfig c;
    read(j, "num_classes", c.num_classes, block);
    read(j, "num_subtiles", c.num_subtiles, block);
    read(j, "num_features", c.num_features, block);
    read(j, "grid", c.grid, block);
    read(j, "num_clusters", c.num_clusters, block);
    read(j, "bumps_min", c.bumps_min, block);
    read(j, "bumps_max", c.bumps_max, block);
    read(j, "bump_sigma_min", c.bump_sigma_min, block);
    read(j, "bump_sigma_max", c.bump_sigma_max, block);
    read(j, "cluster_scale_min", c.cluster_scale_min, block);
    read(j, "cluster_scale_max", c.cluster_scale_max, block);
    read(j, "class_amplitudes", c.class_amplitudes, block);
    read(j, "background", c.background, block);
    read(j, "w_star", c.w_star, block);
    read(j, "lr_noise", c.lr_noise, block);
    read(j, "proxy_noise", c.proxy_noise, block);
    read(j, "y_noise", c.y_noise, block);
    read(j, "max_jitter_km", c.max_jitter_km, block);
    c.validate();
    return c;
}

ordered_json to_json(const DetectorConfig& c)
{
    ordered_json j;
    j["recall"] = c.recall;
    j["fp_rate"] = c.fp_rate;
    j["seed"] = c.seed;
    return j;
}

DetectorConfig detector_config_from_json(const json& j)
{
    reject_unknown(j, {"recall", "fp_rate", "seed"}, "detector");
    DetectorConfig c = default_detector_config();
    if (j.contains("recall")) c.recall = read_broadcast(j["recall"], "recall");
    if (j.contains("fp_rate")) c.fp_rate = read_broadcast(j["fp_rate"], "fp_rate");
    read(j, "seed", c.seed, "detector");
    c.validate(0);
    return c;
}

ordered_json to_json(const TrainConfig& c)
{
    ordered_json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["learning_rate"] = c.learning_rate;
    j["lambda"] = c.lambda;
    j["alpha_start"] = c.alpha_start;
    j["alpha_end"] = c.alpha_end;
    j["hidden"] = c.hidden;
    j["optimizer"] = c.optimizer == OptimizerKind::Sgd ? "sgd" : "adam";
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["checkpoint_every"] = c.checkpoint_every;
    j["seed"] = c.seed;
    return j;
}

TrainConfig train_config_from_json(const json& j)
{
    static const std::set<std::string> known = {"epochs", "batch_size", "learning_rate", "lambda", "alpha_start",
                                                "alpha_end", "hidden", "optimizer", "beta1", "beta2", "adam_eps",
                                                "checkpoint_every", "seed"};
    constexpr const char* block = "train";
    reject_unknown(j, known, block);
    TrainConfig c;
    read(j, "epochs", c.epochs, block);
    read(j, "batch_size", c.batch_size, block);
    read(j, "learning_rate", c.learning_rate, block);
    read(j, "lambda", c.lambda, block);
    read(j, "alpha_start", c.alpha_start, block);
    read(j, "alpha_end", c.alpha_end, block);
    read(j, "hidden", c.hidden, block);
    std::string opt = "adam";
    read(j, "optimizer", opt, block);
    if (opt == "sgd") {
        c.optimizer = OptimizerKind::Sgd;
    } else if (opt == "adam" || opt == "adaptive-moments") {
        c.optimizer = OptimizerKind::Adam;
    } else {
        throw ConfigError("train.optimizer: expected 'sgd' or 'adam'");
    }
    read(j, "beta1", c.beta1, block);
    read(j, "beta2", c.beta2, block);
    read(j, "adam_eps", c.adam_eps, block);
    read(j, "checkpoint_every", c.checkpoint_every, block);
    read(j, "seed", c.seed, block);
    c.validate();
    return c;
}

ordered_json to_json(const GbdtParams& p)
{
    ordered_json j;
    j["n_trees"] = p.n_trees;
    j["max_depth"] = p.max_depth;
    j["shrinkage"] = p.shrinkage;
    j["min_leaf"] = p.min_leaf;
    return j;
}

GbdtParams gbdt_params_from_json(const json& j)
{
    constexpr const char* block = "gbdt";
    reject_unknown(j, {"n_trees", "max_depth", "shrinkage", "min_leaf"}, block);
    GbdtParams p;
    read(j, "n_trees", p.n_trees, block);
    read(j, "max_depth", p.max_depth, block);
    read(j, "shrinkage", p.shrinkage, block);
    read(j, "min_leaf", p.min_leaf, block);
    p.validate();
    return p;
}

std::string crc32_hex(const std::string& bytes)
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return fmt::format("{:08x}", static_cast<unsigned long>(crc));
}

json parse_config_text(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

}  // namespace tiledrop
