#pragma once

#include "tiledrop/config.hpp"
#include "tiledrop/csv.hpp"
#include "tiledrop/detector.hpp"
#include "tiledrop/downstream.hpp"
#include "tiledrop/trainer.hpp"
#include "tiledrop/worldgen.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tiledrop {

// A selection method and its budget. Without fraction or k, methods that
// need a budget are matched per cluster to the learned policy.
struct MethodSpec {
    std::string name;
    std::optional<double> fraction;
    std::optional<int> k;

    [[nodiscard]] bool matched() const { return !fraction && !k; }
    [[nodiscard]] std::string budget_label() const;
};

bool is_known_method(const std::string& name);

struct ExperimentConfig {
    std::optional<std::string> world_path;
    GenConfig generation;
    std::uint64_t world_seed = 7;
    DetectorConfig detector;
    TrainConfig train;
    std::vector<MethodSpec> methods;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 0;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> lambdas{0.5, 1.0, 2.0};
    EvalOptions eval;
    std::string output_dir = "out";

    std::string source_text;  // verbatim config text, echoed into outputs
    std::string hash;         // crc32 of source_text

    [[nodiscard]] bool uses_learned_policy() const;
    // Throws ConfigError.
    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Reads a generation block from either a bare generation config or an
// experiment config's world.generate section (plus world.seed when present).
std::pair<GenConfig, std::optional<std::uint64_t>> load_generation_config(const std::filesystem::path& path);

// Loads the configured world file or generates it from the config.
World obtain_world(const ExperimentConfig& cfg);

// Error raised by a pipeline stage; carries the stage name for the diagnostic.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what);
    [[nodiscard]] const std::string& stage() const { return stage_; }
private:
    std::string stage_;
};

struct MethodResult {
    MethodSpec method;
    std::optional<double> lambda;  // set for methods that depend on a trained policy
    std::optional<std::uint64_t> seed;
    MetricsReport report;
};

struct ExperimentResult {
    std::vector<MethodResult> rows;  // sorted by method, lambda, seed
    std::vector<std::filesystem::path> files;
};

// Full pipeline; writes config echo, metrics.csv, per-seed history and
// checkpoints into cfg.output_dir. On failure writes a FAILED marker and
// rethrows as StageError.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct TradeoffRow {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double acquisition_fraction = 0.0;
    double r2 = 0.0;
    double mse = 0.0;
    double explained_variance = 0.0;
    double mean_l1_gap = 0.0;
};

struct TradeoffTable {
    std::vector<TradeoffRow> rows;  // sorted by lambda, then seed
};

// Trains one policy per (lambda, seed) and evaluates it on the test split.
// Writes tradeoff.csv and tradeoff_plot.csv when write_files is set.
TradeoffTable sweep_lambda(const ExperimentConfig& cfg, std::vector<double> lambdas, bool write_files = true);

struct CostReport {
    double full_cost = 0.0;
    double adaptive_cost = 0.0;
    double savings = 0.0;
};

CostReport cost_report(double area_km2, double price_per_km2, double acquisition_fraction);

double median(std::vector<double> values);

// Evaluates one method on the test split. `learned` supplies the trained
// policy for "ours" and for matched budgets; `seed` keys the random
// baselines. Throws ConfigError when a method needs a policy it lacks.
MetricsReport evaluate_method(const World& world, const Split& split, const DetectionTable& detections,
                              const MethodSpec& method, const PolicyParams* learned, std::uint64_t seed,
                              const EvalOptions& options);

// metrics.csv layout shared by run_experiment, eval and run-baseline.
std::string metrics_csv(const std::vector<MethodResult>& rows, const std::string& config_hash);

}  // namespace tiledrop
