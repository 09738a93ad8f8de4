// Command-line front end for world generation, policy training, evaluation
// and the lambda sweep. Exit codes: 0 ok, 2 config error, 3 runtime failure.

#include "tiledrop/baselines.hpp"
#include "tiledrop/errors.hpp"
#include "tiledrop/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace tiledrop;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int threads = 1;
};

ExperimentConfig experiment_config(const Globals& g)
{
    ExperimentConfig cfg = g.config.empty() ? parse_experiment_config("{}") : load_experiment_config(g.config);
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    cfg.train.threads = g.threads;
    return cfg;
}

World world_for(const ExperimentConfig& cfg, const std::string& world_path)
{
    return world_path.empty() ? obtain_world(cfg) : load_world(world_path);
}

std::filesystem::path with_parent(const std::filesystem::path& out)
{
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Budget-aware adaptive tile acquisition"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "Experiment config (JSON)");
    app.add_option("--seed", g.seed, "Seed override");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

    std::string world_path;
    std::string out;
    std::string ckpt_path;
    std::optional<double> lambda;
    std::string method;
    std::optional<double> fraction;
    std::optional<int> k;
    std::vector<double> lambdas;
    double area = 0.0;
    double price = 0.0;
    double acq = 1.0;

    auto* gen = app.add_subcommand("generate-world", "Generate a synthetic world file");
    gen->add_option("--out", out, "World file")->required();

    auto* train_cmd = app.add_subcommand("train-policy", "Train the acquisition policy");
    train_cmd->add_option("--world", world_path, "World file");
    train_cmd->add_option("--out", out, "Checkpoint file")->required();
    train_cmd->add_option("--lambda", lambda, "Acquisition cost coefficient");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained policy and configured baselines");
    eval_cmd->add_option("--world", world_path, "World file");
    eval_cmd->add_option("--checkpoint", ckpt_path, "Policy checkpoint")->required();
    eval_cmd->add_option("--out", out, "Metrics CSV")->required();

    auto* base_cmd = app.add_subcommand("run-baseline", "Evaluate one baseline selection method");
    base_cmd->add_option("--world", world_path, "World file");
    base_cmd->add_option("--method", method, "Method name")->required();
    auto* frac_opt = base_cmd->add_option("--fraction", fraction, "Tile fraction");
    base_cmd->add_option("--k", k, "Tile count")->excludes(frac_opt);
    base_cmd->add_option("--out", out, "Metrics CSV")->required();

    auto* sweep_cmd = app.add_subcommand("sweep-lambda", "Train and evaluate across lambda values");
    sweep_cmd->add_option("--lambdas", lambdas, "Lambda values")->delimiter(',');

    auto* run_cmd = app.add_subcommand("run", "Run the full configured experiment");

    auto* cost_cmd = app.add_subcommand("cost-report", "Imagery cost of full vs adaptive acquisition");
    cost_cmd->add_option("--area", area, "Area in km^2")->required();
    cost_cmd->add_option("--price", price, "Price per km^2")->required();
    cost_cmd->add_option("--fraction", acq, "Acquisition fraction")->required();
    cost_cmd->add_option("--out", out, "Optional CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            std::uint64_t seed = 7;
            GenConfig gc;
            if (!g.config.empty()) {
                auto [loaded, cfg_seed] = load_generation_config(g.config);
                gc = loaded;
                if (cfg_seed) seed = *cfg_seed;
            }
            if (g.seed) seed = *g.seed;
            save_world(generate_world(gc, seed, g.threads), with_parent(out));
        } else if (*train_cmd) {
            ExperimentConfig cfg = experiment_config(g);
            if (lambda) cfg.train.lambda = *lambda;
            if (g.seed) cfg.train.seed = *g.seed;
            cfg.train.validate();
            const World world = world_for(cfg, world_path);
            const Split split = split_train_test(world, cfg.test_fraction, cfg.split_seed);
            const std::filesystem::path ckpt_out = with_parent(out);
            auto sink = [&](const Checkpoint& ck) {
                Checkpoint c = ck;
                c.config_hash = cfg.hash;
                if (ck.epoch == cfg.train.epochs) {
                    save_checkpoint(c, ckpt_out);
                } else {
                    save_checkpoint(c, fmt::format("{}.epoch{}.json", ckpt_out.string(), ck.epoch));
                }
            };
            auto result = train(world, split.train, cfg.detector, cfg.train, sink);
            if (cfg.train.epochs == 0) {
                save_checkpoint(Checkpoint{result.params, cfg.train.alpha_start, 0, cfg.train.seed, cfg.hash}, ckpt_out);
            }
            write_history_csv(result.history, ckpt_out.string() + ".history.csv", cfg.hash);
        } else if (*eval_cmd) {
            const ExperimentConfig cfg = experiment_config(g);
            const World world = world_for(cfg, world_path);
            const Split split = split_train_test(world, cfg.test_fraction, cfg.split_seed);
            const DetectionTable table(world, cfg.detector);
            const Checkpoint ck = load_checkpoint(ckpt_path);
            if (ck.params.num_features != world.num_features() || ck.params.num_subtiles != world.num_subtiles()) {
                throw ConfigError("checkpoint shapes do not match the world");
            }
            const std::uint64_t seed = g.seed.value_or(ck.seed);
            std::vector<MethodResult> rows;
            for (const auto& m : cfg.methods) {
                rows.push_back({m, std::nullopt, seed, evaluate_method(world, split, table, m, &ck.params, seed, cfg.eval)});
            }
            write_text_file(with_parent(out), metrics_csv(rows, cfg.hash));
        } else if (*base_cmd) {
            const ExperimentConfig cfg = experiment_config(g);
            if (!is_known_method(method) || method == "ours") {
                throw ConfigError("unknown baseline '" + method + "'");
            }
            MethodSpec spec{method, fraction, k};
            if (spec.matched() && method != "no_dropping" && method != "nightlights") {
                throw ConfigError("run-baseline needs --fraction or --k for method '" + method + "'");
            }
            const World world = world_for(cfg, world_path);
            const Split split = split_train_test(world, cfg.test_fraction, cfg.split_seed);
            const DetectionTable table(world, cfg.detector);
            const std::uint64_t seed = g.seed.value_or(cfg.seeds.front());
            std::vector<MethodResult> rows{{spec, std::nullopt, seed, evaluate_method(world, split, table, spec, nullptr, seed, cfg.eval)}};
            write_text_file(with_parent(out), metrics_csv(rows, cfg.hash));
        } else if (*sweep_cmd) {
            ExperimentConfig cfg = experiment_config(g);
            if (g.seed) cfg.seeds = {*g.seed};
            sweep_lambda(cfg, lambdas.empty() ? cfg.lambdas : lambdas);
        } else if (*run_cmd) {
            ExperimentConfig cfg = experiment_config(g);
            if (g.seed) cfg.seeds = {*g.seed};
            run_experiment(cfg);
        } else if (*cost_cmd) {
            const CostReport r = cost_report(area, price, acq);
            const std::string text = csv_row({"area_km2", "price_per_km2", "acquisition_fraction", "full_cost",
                                              "adaptive_cost", "savings"}) +
                                     csv_row({format_double(area), format_double(price), format_double(acq),
                                              format_double(r.full_cost), format_double(r.adaptive_cost),
                                              format_double(r.savings)});
            if (out.empty()) {
                std::cout << text;
            } else {
                write_text_file(with_parent(out), text);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << "failed in stage " << e.stage() << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
