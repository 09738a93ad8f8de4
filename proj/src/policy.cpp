#include "tiledrop/policy.hpp"

#include "tiledrop/config.hpp"
#include "tiledrop/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tiledrop {

namespace {

struct ForwardTrace {
    std::vector<double> hidden;  // tanh activations
    std::vector<double> probs;   // clamped sigmoid outputs
    std::vector<bool> clamped;
};

ForwardTrace run_forward(const PolicyParams& p, std::span<const double> x)
{
    if (x.size() != static_cast<std::size_t>(p.num_features)) {
        throw std::invalid_argument("forward: feature length differs from F");
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("forward: non-finite feature");
        }
    }
    const auto f = static_cast<std::size_t>(p.num_features);
    const auto h = static_cast<std::size_t>(p.hidden);
    const auto s = static_cast<std::size_t>(p.num_subtiles);
    const double* w1 = p.theta.data() + p.w1_offset();
    const double* b1 = p.theta.data() + p.b1_offset();
    const double* w2 = p.theta.data() + p.w2_offset();
    const double* b2 = p.theta.data() + p.b2_offset();

    ForwardTrace tr;
    tr.hidden.resize(h);
    for (std::size_t i = 0; i < h; ++i) {
        double z = b1[i];
        for (std::size_t j = 0; j < f; ++j) {
            z += w1[i * f + j] * x[j];
        }
        tr.hidden[i] = std::tanh(z);
    }
    tr.probs.resize(s);
    tr.clamped.resize(s);
    for (std::size_t k = 0; k < s; ++k) {
        double z = b2[k];
        for (std::size_t i = 0; i < h; ++i) {
            z += w2[k * h + i] * tr.hidden[i];
        }
        const double sig = 1.0 / (1.0 + std::exp(-z));
        const double v = std::clamp(sig, kProbClamp, 1.0 - kProbClamp);
        tr.clamped[k] = v != sig;
        tr.probs[k] = v;
    }
    return tr;
}

void check_alpha(double alpha)
{
    if (!(alpha >= 0.5 && alpha <= 1.0)) {
        throw std::invalid_argument("temperature alpha must be in [0.5, 1]");
    }
}

}  // namespace

void PolicyParams::validate() const
{
    if (num_features < 1 || hidden < 1 || num_subtiles < 1) {
        throw ValidationError("policy params: dimensions must be >= 1");
    }
    if (theta.size() != expected_size(num_features, hidden, num_subtiles)) {
        throw ValidationError("policy params: theta length does not match shapes");
    }
    for (double v : theta) {
        if (!std::isfinite(v)) {
            throw ValidationError("policy params: non-finite entry");
        }
    }
}

PolicyParams zero_params(int num_features, int hidden, int num_subtiles)
{
    if (num_features < 1 || hidden < 1 || num_subtiles < 1) {
        throw ConfigError("policy dimensions must be >= 1");
    }
    PolicyParams p{num_features, hidden, num_subtiles, {}};
    p.theta.assign(PolicyParams::expected_size(num_features, hidden, num_subtiles), 0.0);
    return p;
}

PolicyParams init_params(int num_features, int hidden, int num_subtiles, std::uint64_t seed)
{
    PolicyParams p = zero_params(num_features, hidden, num_subtiles);
    KeyedRng rng{seed, 0x494e4954ULL};
    const double r1 = std::sqrt(6.0 / (num_features + hidden));
    const double r2 = std::sqrt(6.0 / (hidden + num_subtiles));
    for (std::size_t i = 0; i < p.b1_offset(); ++i) {
        p.theta[i] = r1 * (2.0 * rng.uniform() - 1.0);
    }
    for (std::size_t i = p.w2_offset(); i < p.b2_offset(); ++i) {
        p.theta[i] = r2 * (2.0 * rng.uniform() - 1.0);
    }
    return p;
}

ActionProbs forward(const PolicyParams& params, std::span<const double> features)
{
    return ActionProbs{run_forward(params, features).probs};
}

ActionProbs temperature_scale(const ActionProbs& probs, double alpha)
{
    check_alpha(alpha);
    ActionProbs out;
    out.s.reserve(probs.size());
    for (double s : probs.s) {
        out.s.push_back(alpha * s + (1.0 - alpha) * (1.0 - s));
    }
    return out;
}

ActionVector sample_actions(const ActionProbs& probs, KeyedRng& rng)
{
    ActionVector a(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
        a.a[k] = rng.uniform() < probs.s[k] ? 1 : 0;
    }
    return a;
}

ActionVector greedy_actions(const ActionProbs& probs)
{
    ActionVector a(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
        a.a[k] = probs.s[k] > 0.5 ? 1 : 0;
    }
    return a;
}

double log_likelihood(const ActionProbs& probs, const ActionVector& actions)
{
    if (probs.size() != actions.size()) {
        throw std::invalid_argument("log_likelihood: length mismatch");
    }
    double ll = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double s = probs.s[k];
        ll += std::log(actions[k] ? s : 1.0 - s);
    }
    return ll;
}

std::vector<double> grad_log_likelihood(const PolicyParams& params, std::span<const double> features,
                                        const ActionVector& actions, double alpha)
{
    check_alpha(alpha);
    if (actions.size() != static_cast<std::size_t>(params.num_subtiles)) {
        throw std::invalid_argument("grad_log_likelihood: action length differs from S");
    }
    const ForwardTrace tr = run_forward(params, features);
    const auto f = static_cast<std::size_t>(params.num_features);
    const auto h = static_cast<std::size_t>(params.hidden);
    const auto s = static_cast<std::size_t>(params.num_subtiles);
    const double* w2 = params.theta.data() + params.w2_offset();

    // d log pi / d logit_k through the temperature map and the sigmoid.
    std::vector<double> g_logit(s, 0.0);
    for (std::size_t k = 0; k < s; ++k) {
        if (tr.clamped[k]) {
            continue;
        }
        const double p = tr.probs[k];
        const double scaled = alpha * p + (1.0 - alpha) * (1.0 - p);
        const double dlog = actions[k] ? 1.0 / scaled : -1.0 / (1.0 - scaled);
        g_logit[k] = dlog * (2.0 * alpha - 1.0) * p * (1.0 - p);
    }

    std::vector<double> grad(params.size(), 0.0);
    double* gw1 = grad.data() + params.w1_offset();
    double* gb1 = grad.data() + params.b1_offset();
    double* gw2 = grad.data() + params.w2_offset();
    double* gb2 = grad.data() + params.b2_offset();
    std::vector<double> g_hidden(h, 0.0);
    for (std::size_t k = 0; k < s; ++k) {
        gb2[k] = g_logit[k];
        for (std::size_t i = 0; i < h; ++i) {
            gw2[k * h + i] = g_logit[k] * tr.hidden[i];
            g_hidden[i] += g_logit[k] * w2[k * h + i];
        }
    }
    for (std::size_t i = 0; i < h; ++i) {
        const double g_pre = g_hidden[i] * (1.0 - tr.hidden[i] * tr.hidden[i]);
        gb1[i] = g_pre;
        for (std::size_t j = 0; j < f; ++j) {
            gw1[i * f + j] = g_pre * features[j];
        }
    }
    return grad;
}

std::string serialize_checkpoint(const Checkpoint& ckpt)
{
    nlohmann::ordered_json j;
    j["schema_version"] = kCheckpointSchemaVersion;
    j["F"] = ckpt.params.num_features;
    j["H"] = ckpt.params.hidden;
    j["S"] = ckpt.params.num_subtiles;
    j["alpha_at_save"] = ckpt.alpha_at_save;
    j["epoch"] = ckpt.epoch;
    j["seed"] = ckpt.seed;
    j["config_hash"] = ckpt.config_hash;
    j["theta"] = ckpt.params.theta;
    return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("checkpoint: parse error: ") + e.what());
    }
    Checkpoint ck;
    try {
        if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
            throw SchemaError("checkpoint: unsupported schema_version");
        }
        ck.params.num_features = j.at("F").get<int>();
        ck.params.hidden = j.at("H").get<int>();
        ck.params.num_subtiles = j.at("S").get<int>();
        ck.params.theta = j.at("theta").get<std::vector<double>>();
        ck.alpha_at_save = j.at("alpha_at_save").get<double>();
        ck.epoch = j.at("epoch").get<int>();
        ck.seed = j.at("seed").get<std::uint64_t>();
        ck.config_hash = j.value("config_hash", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("checkpoint: ") + e.what());
    }
    ck.params.validate();
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out << serialize_checkpoint(ckpt);
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace tiledrop
