#include "tiledrop/downstream.hpp"

#include "tiledrop/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tiledrop {

namespace {

class TreeBuilder {
public:
    TreeBuilder(const FeatureRows& x, const std::vector<double>& residual, const GbdtParams& p)
        : x_(x), r_(residual), p_(p)
    {
    }

    RegressionTree build()
    {
        std::vector<int> idx(x_.size());
        std::iota(idx.begin(), idx.end(), 0);
        tree_.nodes.clear();
        grow(idx, 0);
        return std::move(tree_);
    }

private:
    int grow(const std::vector<int>& idx, int depth)
    {
        const int node = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int i : idx) {
            sum += r_[static_cast<std::size_t>(i)];
            sum_sq += r_[static_cast<std::size_t>(i)] * r_[static_cast<std::size_t>(i)];
        }
        const double n = static_cast<double>(idx.size());
        tree_.nodes[static_cast<std::size_t>(node)].value = sum / n;

        const auto min_leaf = static_cast<std::size_t>(p_.min_leaf);
        if (depth >= p_.max_depth || idx.size() < 2 * min_leaf) {
            return node;
        }
        const double parent_sse = sum_sq - sum * sum / n;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        std::vector<int> sorted = idx;
        for (std::size_t f = 0; f < x_.front().size(); ++f) {
            std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
                return x_[static_cast<std::size_t>(a)][f] < x_[static_cast<std::size_t>(b)][f];
            });
            double left = 0.0;
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                left += r_[static_cast<std::size_t>(sorted[i])];
                const std::size_t n_left = i + 1;
                const std::size_t n_right = sorted.size() - n_left;
                const double xv = x_[static_cast<std::size_t>(sorted[i])][f];
                const double xnext = x_[static_cast<std::size_t>(sorted[i + 1])][f];
                if (n_left < min_leaf || n_right < min_leaf || !(xv < xnext)) {
                    continue;
                }
                const double right = sum - left;
                const double gain = left * left / static_cast<double>(n_left) +
                                    right * right / static_cast<double>(n_right) - sum * sum / n;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = xv;
                }
            }
        }
        if (best_feature < 0 || best_gain <= 1e-12 * std::max(1.0, parent_sse)) {
            return node;
        }

        std::vector<int> left_idx;
        std::vector<int> right_idx;
        for (int i : idx) {
            (x_[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx : right_idx).push_back(i);
        }
        const int l = grow(left_idx, depth + 1);
        const int r = grow(right_idx, depth + 1);
        auto& nd = tree_.nodes[static_cast<std::size_t>(node)];
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.left = l;
        nd.right = r;
        return node;
    }

    const FeatureRows& x_;
    const std::vector<double>& r_;
    const GbdtParams& p_;
    RegressionTree tree_;
};

}  // namespace

void GbdtParams::validate() const
{
    if (n_trees < 0 || max_depth < 0 || min_leaf < 1 || !(shrinkage > 0.0) || !std::isfinite(shrinkage)) {
        throw ConfigError("gbdt: need n_trees >= 0, max_depth >= 0, min_leaf >= 1, shrinkage > 0");
    }
}

double RegressionTree::predict(std::span<const double> x) const
{
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

double BoostedEnsemble::predict(std::span<const double> x) const
{
    if (x.size() != static_cast<std::size_t>(num_features)) {
        throw std::invalid_argument("gbdt predict: feature length mismatch");
    }
    double sum = 0.0;
    for (const auto& t : trees) {
        sum += t.predict(x);
    }
    return init + shrinkage * sum;
}

BoostedEnsemble fit_gbdt(const FeatureRows& x, std::span<const double> y, const GbdtParams& params)
{
    params.validate();
    if (x.empty() || x.size() != y.size()) {
        throw std::invalid_argument("fit_gbdt: need matching, non-empty X and y");
    }
    if (x.size() < 2) {
        throw std::invalid_argument("fit_gbdt: need at least 2 rows");
    }
    const std::size_t f = x.front().size();
    if (f == 0) {
        throw std::invalid_argument("fit_gbdt: rows must have at least one feature");
    }
    for (const auto& row : x) {
        if (row.size() != f) throw std::invalid_argument("fit_gbdt: ragged feature rows");
        for (double v : row) {
            if (!std::isfinite(v)) throw std::invalid_argument("fit_gbdt: non-finite feature");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("fit_gbdt: non-finite target");
    }

    BoostedEnsemble model;
    model.num_features = static_cast<int>(f);
    model.shrinkage = params.shrinkage;
    model.init = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());

    std::vector<double> pred(y.size(), model.init);
    std::vector<double> residual(y.size());
    for (int stage = 0; stage < params.n_trees; ++stage) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            residual[i] = y[i] - pred[i];
        }
        RegressionTree tree = TreeBuilder(x, residual, params).build();
        for (std::size_t i = 0; i < y.size(); ++i) {
            pred[i] += params.shrinkage * tree.predict(x[i]);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

double predict_gbdt(const BoostedEnsemble& model, std::span<const double> x)
{
    return model.predict(x);
}

std::string serialize_model(const BoostedEnsemble& model)
{
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["num_features"] = model.num_features;
    j["init"] = model.init;
    j["shrinkage"] = model.shrinkage;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) {
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}, {"value", n.value}});
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump() + "\n";
}

BoostedEnsemble parse_model(const std::string& text)
{
    BoostedEnsemble m;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("schema_version").get<int>() != 1) {
            throw SchemaError("gbdt model: unsupported schema_version");
        }
        m.num_features = j.at("num_features").get<int>();
        m.init = j.at("init").get<double>();
        m.shrinkage = j.at("shrinkage").get<double>();
        for (const auto& jt : j.at("trees")) {
            RegressionTree t;
            for (const auto& jn : jt) {
                t.nodes.push_back(TreeNode{jn.at("feature").get<int>(), jn.at("threshold").get<double>(),
                                           jn.at("left").get<int>(), jn.at("right").get<int>(), jn.at("value").get<double>()});
            }
            m.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("gbdt model: ") + e.what());
    }
    for (const auto& t : m.trees) {
        if (t.nodes.empty()) throw ValidationError("gbdt model: empty tree");
        for (const auto& n : t.nodes) {
            const auto count = static_cast<int>(t.nodes.size());
            if (!std::isfinite(n.value)) throw ValidationError("gbdt model: non-finite leaf");
            if (n.feature >= m.num_features) throw ValidationError("gbdt model: split feature out of range");
            if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count)) {
                throw ValidationError("gbdt model: child index out of range");
            }
        }
    }
    return m;
}

}  // namespace tiledrop
