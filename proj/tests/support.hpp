#pragma once

// Independent reference computations shared by the unit and acceptance
// suites. Nothing here calls into the code under test.

#include "tiledrop/worldgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace testsupport {

inline double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / n;
    const double mb = sb / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// Mean over clusters of corr(lr_features[channel], tile total truth);
// clusters with a constant column are skipped.
inline double cluster_mean_feature_corr(const tiledrop::World& w, std::size_t channel)
{
    double sum = 0;
    int n = 0;
    for (const auto& cl : w.clusters) {
        std::vector<double> a, b;
        for (const auto& t : cl.tiles) {
            a.push_back(t.lr_features[channel]);
            double total = 0;
            for (const auto& st : t.subtiles)
                for (auto c : st.truth.values) total += static_cast<double>(c);
            b.push_back(total);
        }
        const double c = pearson(a, b);
        if (std::isfinite(c)) {
            sum += c;
            ++n;
        }
    }
    return sum / n;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

inline tiledrop::GenConfig small_config(int clusters = 12)
{
    tiledrop::GenConfig c;
    c.num_clusters = clusters;
    return c;
}

// Scratch least-squares boosting: O(n^2) split search that recomputes both
// side SSEs directly for each candidate threshold.
struct OracleNode {
    int feature = -1;
    double threshold = 0;
    double value = 0;
    int left = -1, right = -1;
};

inline double sse(const std::vector<double>& v)
{
    if (v.empty()) return 0;
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
}

inline int oracle_grow(std::vector<OracleNode>& nodes, const std::vector<std::vector<double>>& x, const std::vector<double>& r,
                const std::vector<int>& idx, int depth, int max_depth, int min_leaf)
{
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    std::vector<double> vals;
    for (int i : idx) vals.push_back(r[static_cast<std::size_t>(i)]);
    nodes[static_cast<std::size_t>(id)].value = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    if (depth >= max_depth || static_cast<int>(idx.size()) < 2 * min_leaf) return id;
    const double parent = sse(vals);

    int best_f = -1;
    double best_t = 0, best_sse = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < x[0].size(); ++f) {
        std::vector<double> cand;
        for (int i : idx) cand.push_back(x[static_cast<std::size_t>(i)][f]);
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        for (std::size_t c = 0; c + 1 < cand.size(); ++c) {
            std::vector<double> l, rr;
            for (int i : idx) (x[static_cast<std::size_t>(i)][f] <= cand[c] ? l : rr).push_back(r[static_cast<std::size_t>(i)]);
            if (static_cast<int>(l.size()) < min_leaf || static_cast<int>(rr.size()) < min_leaf) continue;
            const double s = sse(l) + sse(rr);
            if (s < best_sse - 1e-12) {
                best_sse = s;
                best_f = static_cast<int>(f);
                best_t = cand[c];
            }
        }
    }
    if (best_f < 0 || parent - best_sse <= 1e-12 * std::max(1.0, parent)) return id;
    std::vector<int> li, ri;
    for (int i : idx) (x[static_cast<std::size_t>(i)][static_cast<std::size_t>(best_f)] <= best_t ? li : ri).push_back(i);
    const int l = oracle_grow(nodes, x, r, li, depth + 1, max_depth, min_leaf);
    const int rgt = oracle_grow(nodes, x, r, ri, depth + 1, max_depth, min_leaf);
    nodes[static_cast<std::size_t>(id)].feature = best_f;
    nodes[static_cast<std::size_t>(id)].threshold = best_t;
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = rgt;
    return id;
}

inline double oracle_predict(const std::vector<OracleNode>& nodes, const std::vector<double>& x)
{
    int n = 0;
    while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
        const auto& nd = nodes[static_cast<std::size_t>(n)];
        n = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(n)].value;
}

// Training predictions after each stage, stage 0 being the mean.
inline std::vector<std::vector<double>> oracle_boost(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                                            int n_trees, int max_depth, double shrinkage, int min_leaf)
{
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    std::vector<double> f(y.size(), mean);
    std::vector<std::vector<double>> stages{f};
    std::vector<int> all(y.size());
    std::iota(all.begin(), all.end(), 0);
    for (int m = 0; m < n_trees; ++m) {
        std::vector<double> r(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - f[i];
        std::vector<OracleNode> nodes;
        oracle_grow(nodes, x, r, all, 0, max_depth, min_leaf);
        for (std::size_t i = 0; i < y.size(); ++i) f[i] += shrinkage * oracle_predict(nodes, x[i]);
        stages.push_back(f);
    }
    return stages;
}

}  // namespace testsupport
