#include "tiledrop/reward.hpp"

#include <stdexcept>

namespace tiledrop {

RewardBreakdown reward(const ClassCounts& v_hat, const ClassCounts& v_ref, const ActionVector& actions, double lambda)
{
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("reward: lambda must be >= 0");
    }
    if (actions.size() == 0) {
        throw std::invalid_argument("reward: empty action vector");
    }
    RewardBreakdown r;
    r.accuracy = -static_cast<double>(l1_distance(v_ref, v_hat));
    r.cost = lambda * (1.0 - static_cast<double>(actions.acquired()) / static_cast<double>(actions.size()));
    r.total = r.accuracy + r.cost;
    return r;
}

}  // namespace tiledrop
