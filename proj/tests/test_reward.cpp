#include "tiledrop/reward.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

using namespace tiledrop;

namespace {

ActionVector first_k(std::size_t s, std::size_t k)
{
    ActionVector a(s);
    for (std::size_t i = 0; i < k; ++i) a.a[i] = 1;
    return a;
}

}  // namespace

TEST_CASE("reward unit examples")
{
    const ClassCounts zero(3);
    const auto r0 = reward(zero, zero, ActionVector(4), 1.0);
    CHECK(r0.total == 1.0);
    CHECK(r0.accuracy == 0.0);
    CHECK(r0.cost == 1.0);

    const ClassCounts v{std::vector<Count>{2, 0, 5}};
    CHECK(reward(v, v, ActionVector(4, true), 1.0).total == 0.0);

    // L1 gap of 3, one of four subtiles acquired.
    const ClassCounts ref{std::vector<Count>{3, 1, 4}};
    const ClassCounts hat{std::vector<Count>{1, 1, 3}};
    const auto r = reward(hat, ref, first_k(4, 1), 1.0);
    CHECK(r.accuracy == -3.0);
    CHECK(r.cost == 0.75);
    CHECK(r.total == -2.25);
    CHECK(r.total == r.accuracy + r.cost);
}

TEST_CASE("reward errors")
{
    const ClassCounts v(3);
    CHECK_THROWS_AS(reward(v, v, ActionVector(4), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(reward(v, ClassCounts(2), ActionVector(4), 1.0), std::invalid_argument);
}

TEST_CASE("cost term is linear in acquired subtiles with slope -lambda/S")
{
    const ClassCounts v{std::vector<Count>{1, 2}};
    for (std::size_t s : {1u, 4u, 9u}) {
        for (double lambda : {0.0, 0.5, 1.0, 2.0, 3.7}) {
            // Least-squares line through (k, r_cost(k)), k = 0..S.
            std::vector<double> xs, ys;
            for (std::size_t k = 0; k <= s; ++k) {
                xs.push_back(static_cast<double>(k));
                ys.push_back(reward(v, v, first_k(s, k), lambda).cost);
            }
            const double n = static_cast<double>(xs.size());
            const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
            const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
            double sxy = 0, sxx = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sxy += (xs[i] - mx) * (ys[i] - my);
                sxx += (xs[i] - mx) * (xs[i] - mx);
            }
            const double slope = s == 0 ? 0 : sxy / sxx;
            const double intercept = my - slope * mx;
            CHECK(std::abs(slope + lambda / static_cast<double>(s)) < 1e-12);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                CHECK(std::abs(ys[i] - (intercept + slope * xs[i])) < 1e-12);
                CHECK(ys[i] >= 0.0);
                CHECK(ys[i] <= lambda);
            }
        }
    }
}

TEST_CASE("reward is invariant to class permutations and scales cost with lambda")
{
    const std::vector<Count> ref{4, 0, 7, 2, 1};
    const std::vector<Count> hat{1, 3, 7, 0, 1};
    const auto a = ActionVector(std::vector<std::uint8_t>{1, 0, 1, 0});
    const auto base = reward(ClassCounts{hat}, ClassCounts{ref}, a, 1.0);
    std::vector<std::size_t> perm{0, 1, 2, 3, 4};
    do {
        std::vector<Count> pr(5), ph(5);
        for (std::size_t i = 0; i < 5; ++i) {
            pr[i] = ref[perm[i]];
            ph[i] = hat[perm[i]];
        }
        CHECK(reward(ClassCounts{ph}, ClassCounts{pr}, a, 1.0).total == base.total);
    } while (std::next_permutation(perm.begin(), perm.end()));

    const auto scaled = reward(ClassCounts{hat}, ClassCounts{ref}, a, 2.5);
    CHECK(scaled.accuracy == base.accuracy);
    CHECK(scaled.cost == 2.5 * base.cost);
}

TEST_CASE("accuracy term is zero exactly when counts agree")
{
    const ClassCounts ref{std::vector<Count>{2, 2}};
    CHECK(reward(ref, ref, ActionVector(2), 1.0).accuracy == 0.0);
    CHECK(reward(ClassCounts{std::vector<Count>{2, 1}}, ref, ActionVector(2), 1.0).accuracy < 0.0);
}
