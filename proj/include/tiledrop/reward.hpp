#pragma once

#include "tiledrop/counts.hpp"

namespace tiledrop {

struct RewardBreakdown {
    double accuracy = 0.0;  // -||v_ref - v_hat||_1, <= 0
    double cost = 0.0;      // lambda * (1 - acquired / S), in [0, lambda]
    double total = 0.0;
};

// Throws std::invalid_argument when lambda < 0 or lengths disagree.
RewardBreakdown reward(const ClassCounts& v_hat, const ClassCounts& v_ref, const ActionVector& actions, double lambda);

}  // namespace tiledrop
