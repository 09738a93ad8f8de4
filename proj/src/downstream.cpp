#include "tiledrop/downstream.hpp"

#include "tiledrop/errors.hpp"

#include <stdexcept>

namespace tiledrop {

namespace {

void check_mask(const SelectionMask& mask, int grid, int num_subtiles)
{
    if (mask.grid != grid || mask.num_subtiles != num_subtiles ||
        mask.tiles.size() != static_cast<std::size_t>(grid * grid)) {
        throw std::invalid_argument("selection mask shape does not match the cluster");
    }
    for (const auto& a : mask.tiles) {
        if (a.size() != static_cast<std::size_t>(num_subtiles)) {
            throw std::invalid_argument("selection mask has a wrongly sized action vector");
        }
    }
}

std::vector<double> to_reals(const ClassCounts& c)
{
    return {c.values.begin(), c.values.end()};
}

}  // namespace

ClusterFeatures aggregate_cluster(const Cluster& cluster, const SelectionMask& mask, const DetectorConfig& cfg)
{
    const int s = cluster.tiles.empty() ? 0 : static_cast<int>(cluster.tiles.front().subtiles.size());
    check_mask(mask, cluster.grid, s);
    ClassCounts total;
    for (std::size_t t = 0; t < cluster.tiles.size(); ++t) {
        total += gated_counts(cluster.tiles[t], cluster.grid, mask.tiles[t], cfg);
    }
    return ClusterFeatures{to_reals(total)};
}

ClusterFeatures aggregate_cluster(const DetectionTable& table, int cluster_index, const SelectionMask& mask)
{
    check_mask(mask, mask.grid, table.num_subtiles());
    ClassCounts total(static_cast<std::size_t>(table.num_classes()));
    for (std::size_t t = 0; t < mask.tiles.size(); ++t) {
        total += table.gated(cluster_index, static_cast<int>(t), mask.tiles[t]);
    }
    return ClusterFeatures{to_reals(total)};
}

MetricsReport evaluate_pipeline(const World& world, const SelectionSource& source, const Split& split,
                                const DetectionTable& detections, const EvalOptions& options)
{
    if (split.train.size() < 2 || split.test.size() < 2) {
        throw std::invalid_argument("evaluate_pipeline: need at least 2 train and 2 test clusters");
    }
    const int g = world.grid();
    const int s = world.num_subtiles();
    const SelectionMask full = SelectionMask::full(g, s);

    FeatureRows x_train;
    std::vector<double> y_train;
    for (int id : split.train) {
        const SelectionMask mask = options.train_on_masked ? source(id) : full;
        x_train.push_back(aggregate_cluster(detections, id, mask).m);
        y_train.push_back(world.clusters.at(static_cast<std::size_t>(id)).y);
    }
    const BoostedEnsemble model = fit_gbdt(x_train, y_train, options.gbdt);

    MetricsReport rep;
    std::vector<double> y_test;
    std::vector<double> pred;
    std::vector<ClusterFeatures> reference;
    std::vector<ClusterFeatures> approx;
    std::size_t acquired = 0;
    std::size_t total_subtiles = 0;
    double gap = 0.0;
    std::size_t tiles = 0;
    for (int id : split.test) {
        const SelectionMask mask = source(id);
        check_mask(mask, g, s);
        approx.push_back(aggregate_cluster(detections, id, mask));
        reference.push_back(aggregate_cluster(detections, id, full));
        pred.push_back(model.predict(approx.back().m));
        y_test.push_back(world.clusters.at(static_cast<std::size_t>(id)).y);
        acquired += mask.acquired_subtiles();
        total_subtiles += mask.tiles.size() * static_cast<std::size_t>(s);
        for (std::size_t t = 0; t < mask.tiles.size(); ++t) {
            gap += static_cast<double>(l1_distance(detections.reference(id, static_cast<int>(t)),
                                                   detections.gated(id, static_cast<int>(t), mask.tiles[t])));
            ++tiles;
        }
    }

    try {
        rep.r2 = pearson_r2(y_test, pred);
    } catch (const MetricError&) {
        // Constant predictions carry no correlation; a constant target is a
        // genuine error and is rethrown by explained_variance below.
        rep.r2 = 0.0;
        rep.degenerate_predictions = true;
    }
    rep.mse = mse(y_test, pred);
    rep.explained_variance = explained_variance(y_test, pred);
    rep.acquisition_fraction = static_cast<double>(acquired) / static_cast<double>(total_subtiles);
    rep.missed_per_class = missed_per_class(reference, approx);
    rep.mean_l1_gap = gap / static_cast<double>(tiles);
    return rep;
}

MetricsReport evaluate_pipeline(const World& world, const SelectionSource& source, const Split& split,
                                const DetectorConfig& detector, const EvalOptions& options)
{
    return evaluate_pipeline(world, source, split, DetectionTable(world, detector), options);
}

}  // namespace tiledrop
