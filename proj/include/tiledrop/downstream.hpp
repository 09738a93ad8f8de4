#pragma once

#include "tiledrop/baselines.hpp"
#include "tiledrop/detector.hpp"
#include "tiledrop/worldgen.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tiledrop {

// Cluster-level counts aggregated over tiles, as reals.
struct ClusterFeatures {
    std::vector<double> m;
};

ClusterFeatures aggregate_cluster(const Cluster& cluster, const SelectionMask& mask, const DetectorConfig& cfg);
ClusterFeatures aggregate_cluster(const DetectionTable& table, int cluster_index, const SelectionMask& mask);

struct GbdtParams {
    int n_trees = 100;
    int max_depth = 3;
    double shrinkage = 0.1;
    int min_leaf = 2;

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    [[nodiscard]] double predict(std::span<const double> x) const;
};

struct BoostedEnsemble {
    int num_features = 0;
    double init = 0.0;
    double shrinkage = 0.1;
    std::vector<RegressionTree> trees;

    [[nodiscard]] double predict(std::span<const double> x) const;
};

using FeatureRows = std::vector<std::vector<double>>;

// Least-squares boosting. Throws std::invalid_argument on empty or
// mismatched data and non-finite targets.
BoostedEnsemble fit_gbdt(const FeatureRows& x, std::span<const double> y, const GbdtParams& params = {});
double predict_gbdt(const BoostedEnsemble& model, std::span<const double> x);

std::string serialize_model(const BoostedEnsemble& model);
BoostedEnsemble parse_model(const std::string& text);

// Squared sample Pearson correlation. Throws MetricError on zero variance.
double pearson_r2(std::span<const double> y, std::span<const double> y_hat);
double mse(std::span<const double> y, std::span<const double> y_hat);
// 1 - Var(y - y_hat) / Var(y). Throws MetricError when Var(y) == 0.
double explained_variance(std::span<const double> y, std::span<const double> y_hat);

// Per class, the mean over clusters of max(0, m_c - m_hat_c).
std::vector<double> missed_per_class(const std::vector<ClusterFeatures>& reference,
                                     const std::vector<ClusterFeatures>& approx);

struct MetricsReport {
    double r2 = 0.0;
    double mse = 0.0;
    double explained_variance = 0.0;
    double acquisition_fraction = 0.0;
    std::vector<double> missed_per_class;
    double mean_l1_gap = 0.0;  // per test tile, against reference counts
    // Predictions had zero variance, so r2 is reported as 0 instead of
    // being undefined.
    bool degenerate_predictions = false;
};

// Produces the mask used for one test cluster (given its index in World::clusters).
using SelectionSource = std::function<SelectionMask(int cluster_index)>;

struct EvalOptions {
    GbdtParams gbdt;
    // Ablation: fit on masked training features instead of full acquisition.
    bool train_on_masked = false;
};

MetricsReport evaluate_pipeline(const World& world, const SelectionSource& source, const Split& split,
                                const DetectionTable& detections, const EvalOptions& options = {});
MetricsReport evaluate_pipeline(const World& world, const SelectionSource& source, const Split& split,
                                const DetectorConfig& detector, const EvalOptions& options = {});

}  // namespace tiledrop
