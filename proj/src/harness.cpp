#include "tiledrop/harness.hpp"

#include "tiledrop/baselines.hpp"
#include "tiledrop/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace tiledrop {

using nlohmann::json;

namespace {

const std::set<std::string>& known_methods()
{
    static const std::set<std::string> names = {"ours",  "no_dropping", "fixed",       "random",    "stochastic",
                                                "green", "counts_pred", "nightlights", "settlement"};
    return names;
}

bool needs_budget(const std::string& name)
{
    return name != "ours" && name != "no_dropping" && name != "nightlights";
}

bool is_random(const std::string& name)
{
    return name == "random" || name == "stochastic";
}

std::uint64_t name_key(const std::string& name)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : name) {
        h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    }
    return h;
}

MethodSpec method_from_json(const json& j)
{
    MethodSpec m;
    if (j.is_string()) {
        m.name = j.get<std::string>();
    } else if (j.is_object()) {
        for (const auto& [key, _] : j.items()) {
            if (key != "name" && key != "fraction" && key != "k") {
                throw ConfigError("methods: unknown key '" + key + "'");
            }
        }
        try {
            m.name = j.at("name").get<std::string>();
            if (j.contains("fraction")) m.fraction = j["fraction"].get<double>();
            if (j.contains("k")) m.k = j["k"].get<int>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("methods: ") + e.what());
        }
    } else {
        throw ConfigError("methods: entries must be names or objects");
    }
    return m;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

TrainResult train_for(const World& world, const Split& split, const ExperimentConfig& cfg, double lambda,
                      std::uint64_t seed, bool write_files)
{
    TrainConfig tc = cfg.train;
    tc.lambda = lambda;
    tc.seed = seed;
    const std::filesystem::path dir = cfg.output_dir;
    const std::string tag = fmt::format("lambda{}_seed{}", format_double(lambda), seed);
    CheckpointSink sink;
    if (write_files) {
        sink = [&](const Checkpoint& ck) {
            Checkpoint c = ck;
            c.config_hash = cfg.hash;
            save_checkpoint(c, dir / fmt::format("policy_{}_epoch{}.json", tag, ck.epoch));
            if (ck.epoch == tc.epochs) {
                save_checkpoint(c, dir / fmt::format("policy_{}.json", tag));
            }
        };
    }
    auto result = train(world, split.train, cfg.detector, tc, sink);
    if (write_files) {
        write_history_csv(result.history, dir / fmt::format("history_{}.csv", tag), cfg.hash);
    }
    return result;
}

}  // namespace

std::string MethodSpec::budget_label() const
{
    if (fraction) return "fraction=" + format_double(*fraction);
    if (k) return "k=" + std::to_string(*k);
    if (name == "ours") return "policy";
    if (name == "nightlights") return "proxy>0";
    return needs_budget(name) ? "matched" : "all";
}

bool is_known_method(const std::string& name)
{
    return known_methods().contains(name);
}

bool ExperimentConfig::uses_learned_policy() const
{
    return std::any_of(methods.begin(), methods.end(), [](const MethodSpec& m) {
        return m.name == "ours" || (needs_budget(m.name) && m.matched());
    });
}

void ExperimentConfig::validate() const
{
    if (!world_path) generation.validate();
    detector.validate(world_path ? 0 : generation.num_classes);
    train.validate();
    if (methods.empty()) throw ConfigError("methods must not be empty");
    for (const auto& m : methods) {
        if (!is_known_method(m.name)) throw ConfigError("unknown method '" + m.name + "'");
        if (m.fraction && m.k) throw ConfigError("method '" + m.name + "': give fraction or k, not both");
        if (m.fraction && !(*m.fraction > 0.0 && *m.fraction <= 1.0)) {
            throw ConfigError("method '" + m.name + "': fraction must be in (0, 1]");
        }
        if (m.k && *m.k < 0) throw ConfigError("method '" + m.name + "': k must be >= 0");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("split.test_fraction must be in (0, 1)");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    for (double l : lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambdas must be finite and >= 0");
    }
    eval.gbdt.validate();
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_experiment_config(const std::string& text)
{
    const json j = parse_config_text(text);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    static const std::set<std::string> known = {"world",  "detector", "train",  "methods",         "split",
                                                "seeds",  "lambdas",  "gbdt",   "train_on_masked", "output_dir"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
    ExperimentConfig cfg;
    cfg.source_text = text;
    cfg.hash = crc32_hex(text);
    cfg.detector = default_detector_config();
    try {
        if (j.contains("world")) {
            const auto& w = j["world"];
            if (!w.is_object()) throw ConfigError("world: expected an object");
            for (const auto& [key, _] : w.items()) {
                if (key != "path" && key != "generate" && key != "seed") {
                    throw ConfigError("world: unknown key '" + key + "'");
                }
            }
            if (w.contains("path")) cfg.world_path = w["path"].get<std::string>();
            if (w.contains("generate")) cfg.generation = gen_config_from_json(w["generate"]);
            if (w.contains("seed")) cfg.world_seed = w["seed"].get<std::uint64_t>();
        }
        if (j.contains("detector")) cfg.detector = detector_config_from_json(j["detector"]);
        if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
        if (j.contains("methods")) {
            for (const auto& m : j["methods"]) cfg.methods.push_back(method_from_json(m));
        } else {
            cfg.methods = {{"ours", {}, {}}, {"no_dropping", {}, {}}, {"random", {}, {}}};
        }
        if (j.contains("split")) {
            const auto& s = j["split"];
            for (const auto& [key, _] : s.items()) {
                if (key != "test_fraction" && key != "seed") throw ConfigError("split: unknown key '" + key + "'");
            }
            cfg.test_fraction = s.value("test_fraction", cfg.test_fraction);
            cfg.split_seed = s.value("seed", cfg.split_seed);
        }
        if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("lambdas")) cfg.lambdas = j["lambdas"].get<std::vector<double>>();
        if (j.contains("gbdt")) cfg.eval.gbdt = gbdt_params_from_json(j["gbdt"]);
        if (j.contains("train_on_masked")) cfg.eval.train_on_masked = j["train_on_masked"].get<bool>();
        if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_experiment_config(text);
}

std::pair<GenConfig, std::optional<std::uint64_t>> load_generation_config(const std::filesystem::path& path)
{
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    const json j = parse_config_text(text);
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    if (!j.contains("world")) {
        return {gen_config_from_json(j), std::nullopt};
    }
    const auto cfg = parse_experiment_config(text);
    std::optional<std::uint64_t> seed;
    if (j["world"].contains("seed")) seed = cfg.world_seed;
    return {cfg.generation, seed};
}

World obtain_world(const ExperimentConfig& cfg)
{
    if (cfg.world_path) {
        return load_world(*cfg.world_path);
    }
    return generate_world(cfg.generation, cfg.world_seed, cfg.train.threads);
}

StageError::StageError(std::string stage, const std::string& what)
    : std::runtime_error(stage + ": " + what), stage_(std::move(stage))
{
}

double median(std::vector<double> values)
{
    if (values.empty()) throw std::invalid_argument("median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricsReport evaluate_method(const World& world, const Split& split, const DetectionTable& detections,
                              const MethodSpec& method, const PolicyParams* learned, std::uint64_t seed,
                              const EvalOptions& options)
{
    const int g = world.grid();
    const int s = world.num_subtiles();
    const bool matched = needs_budget(method.name) && method.matched();
    if ((method.name == "ours" || matched) && learned == nullptr) {
        throw ConfigError("method '" + method.name + "' needs a trained policy");
    }
    std::optional<CountsRegressor> regressor;
    if (method.name == "counts_pred") {
        regressor = CountsRegressor::fit(world, split.train);
    }

    SelectionSource source = [&](int idx) -> SelectionMask {
        const Cluster& cl = world.clusters.at(static_cast<std::size_t>(idx));
        if (method.name == "ours") return learned_policy_mask(cl, *learned);
        if (method.name == "no_dropping") return no_dropping(cl, s);
        if (method.name == "nightlights") return proxy_layer_policy(cl, s, ProxyMode::Nightlights, 0);

        int k = 0;
        if (method.k) {
            k = std::min(*method.k, g * g);
        } else if (method.fraction) {
            k = tile_budget(g, *method.fraction);
        } else {
            const double f = learned_policy_mask(cl, *learned).fraction();
            k = f > 0.0 ? tile_budget(g, f) : 0;
        }
        if (k == 0) return SelectionMask::empty(g, s);
        const double frac = static_cast<double>(k) / (g * g);
        KeyedRng rng{seed, static_cast<std::uint64_t>(cl.id), name_key(method.name)};
        if (method.name == "fixed") return fixed_policy(cl, s, frac);
        if (method.name == "random") return random_policy(cl, s, frac, rng);
        if (method.name == "stochastic") return stochastic_policy(cl, s, frac, rng);
        if (method.name == "green") return green_policy(cl, s, k);
        if (method.name == "counts_pred") return counts_pred_policy(*regressor, cl, s, k);
        if (method.name == "settlement") return proxy_layer_policy(cl, s, ProxyMode::Settlement, k);
        throw ConfigError("unknown method '" + method.name + "'");
    };
    return evaluate_pipeline(world, source, split, detections, options);
}

std::string metrics_csv(const std::vector<MethodResult>& rows, const std::string& config_hash)
{
    std::map<std::string, std::vector<double>> r2_by_method;
    for (const auto& r : rows) {
        r2_by_method[r.method.name + "|" + r.method.budget_label()].push_back(r.report.r2);
    }
    std::string out = csv_row({"method", "budget", "lambda", "seed", "r2", "mse", "explained_variance",
                               "acquisition_fraction", "mean_l1_gap", "missed_total", "degenerate", "r2_mean",
                               "r2_std", "config_hash"});
    for (const auto& r : rows) {
        const auto& group = r2_by_method[r.method.name + "|" + r.method.budget_label()];
        double missed = 0.0;
        for (double v : r.report.missed_per_class) missed += v;
        out += csv_row({r.method.name, r.method.budget_label(), r.lambda ? format_double(*r.lambda) : "",
                        r.seed ? std::to_string(*r.seed) : "", format_double(r.report.r2), format_double(r.report.mse),
                        format_double(r.report.explained_variance), format_double(r.report.acquisition_fraction),
                        format_double(r.report.mean_l1_gap), format_double(missed),
                        r.report.degenerate_predictions ? "1" : "0", format_double(mean_of(group)),
                        format_double(sample_std(group)), config_hash});
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    const std::filesystem::path dir = cfg.output_dir;
    std::filesystem::create_directories(dir);
    std::filesystem::remove(dir / "FAILED");
    ExperimentResult result;
    try {
        stage("config", [&] { cfg.validate(); });
        write_text_file(dir / "config.json", cfg.source_text);
        result.files.push_back(dir / "config.json");

        const World world = stage("world", [&] { return obtain_world(cfg); });
        if (!cfg.world_path) {
            save_world(world, dir / "world.json");
            result.files.push_back(dir / "world.json");
        }
        const Split split = stage("split", [&] { return split_train_test(world, cfg.test_fraction, cfg.split_seed); });
        const DetectionTable detections = stage("detect", [&] { return DetectionTable(world, cfg.detector); });

        std::map<std::uint64_t, PolicyParams> policies;
        if (cfg.uses_learned_policy()) {
            for (auto seed : cfg.seeds) {
                policies[seed] = stage("train", [&] { return train_for(world, split, cfg, cfg.train.lambda, seed, true); }).params;
            }
        }

        stage("evaluate", [&] {
            for (const auto& m : cfg.methods) {
                const bool per_seed = m.name == "ours" || (needs_budget(m.name) && m.matched()) || is_random(m.name);
                const bool policy_bound = m.name == "ours" || (needs_budget(m.name) && m.matched());
                if (!per_seed) {
                    result.rows.push_back(
                        {m, std::nullopt, std::nullopt, evaluate_method(world, split, detections, m, nullptr, 0, cfg.eval)});
                    continue;
                }
                for (auto seed : cfg.seeds) {
                    const PolicyParams* learned = policy_bound ? &policies.at(seed) : nullptr;
                    result.rows.push_back({m, policy_bound ? std::optional(cfg.train.lambda) : std::nullopt, seed,
                                           evaluate_method(world, split, detections, m, learned, seed, cfg.eval)});
                }
            }
        });
        std::stable_sort(result.rows.begin(), result.rows.end(), [](const MethodResult& a, const MethodResult& b) {
            return std::tie(a.method.name, a.lambda, a.seed) < std::tie(b.method.name, b.lambda, b.seed);
        });

        stage("write", [&] { write_text_file(dir / "metrics.csv", metrics_csv(result.rows, cfg.hash)); });
        result.files.push_back(dir / "metrics.csv");
    } catch (const StageError& e) {
        try {
            write_text_file(dir / "FAILED", std::string(e.what()) + "\n");
        } catch (...) {
        }
        throw;
    }
    return result;
}

TradeoffTable sweep_lambda(const ExperimentConfig& cfg, std::vector<double> lambdas, bool write_files)
{
    if (lambdas.size() < 2) {
        throw ConfigError("sweep_lambda: need at least two lambda values");
    }
    std::sort(lambdas.begin(), lambdas.end());
    const std::filesystem::path dir = cfg.output_dir;
    if (write_files) {
        std::filesystem::create_directories(dir);
        write_text_file(dir / "config.json", cfg.source_text);
    }
    const World world = obtain_world(cfg);
    const Split split = split_train_test(world, cfg.test_fraction, cfg.split_seed);
    const DetectionTable detections(world, cfg.detector);
    const MethodSpec ours{"ours", {}, {}};

    TradeoffTable table;
    for (double lambda : lambdas) {
        for (auto seed : cfg.seeds) {
            const auto trained = train_for(world, split, cfg, lambda, seed, write_files);
            const auto rep = evaluate_method(world, split, detections, ours, &trained.params, seed, cfg.eval);
            table.rows.push_back({lambda, seed, rep.acquisition_fraction, rep.r2, rep.mse, rep.explained_variance,
                                  rep.mean_l1_gap});
        }
    }

    if (write_files) {
        std::string rows = csv_row({"lambda", "seed", "acquisition_fraction", "r2", "mse", "explained_variance",
                                    "mean_l1_gap", "config_hash"});
        for (const auto& r : table.rows) {
            rows += csv_row({format_double(r.lambda), std::to_string(r.seed), format_double(r.acquisition_fraction),
                             format_double(r.r2), format_double(r.mse), format_double(r.explained_variance),
                             format_double(r.mean_l1_gap), cfg.hash});
        }
        write_text_file(dir / "tradeoff.csv", rows);

        std::string plot = csv_row({"lambda", "median_acquisition_fraction", "r2_mean", "r2_std", "config_hash"});
        for (std::size_t i = 0; i < table.rows.size();) {
            std::vector<double> fr;
            std::vector<double> r2;
            const double lambda = table.rows[i].lambda;
            for (; i < table.rows.size() && table.rows[i].lambda == lambda; ++i) {
                fr.push_back(table.rows[i].acquisition_fraction);
                r2.push_back(table.rows[i].r2);
            }
            plot += csv_row({format_double(lambda), format_double(median(fr)), format_double(mean_of(r2)),
                             format_double(sample_std(r2)), cfg.hash});
        }
        write_text_file(dir / "tradeoff_plot.csv", plot);
    }
    return table;
}

CostReport cost_report(double area_km2, double price_per_km2, double acquisition_fraction)
{
    if (!(area_km2 >= 0.0) || !(price_per_km2 >= 0.0) || !(acquisition_fraction >= 0.0 && acquisition_fraction <= 1.0)) {
        throw ConfigError("cost_report: inputs must be >= 0 and fraction <= 1");
    }
    CostReport r;
    r.full_cost = area_km2 * price_per_km2;
    r.adaptive_cost = r.full_cost * acquisition_fraction;
    r.savings = r.full_cost - r.adaptive_cost;
    return r;
}

}  // namespace tiledrop
