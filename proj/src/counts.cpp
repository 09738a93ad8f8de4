#include "tiledrop/counts.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace tiledrop {

Count ClassCounts::total() const noexcept
{
    return std::accumulate(values.begin(), values.end(), Count{0});
}

bool ClassCounts::is_zero() const noexcept
{
    return std::all_of(values.begin(), values.end(), [](Count c) { return c == 0; });
}

ClassCounts& ClassCounts::operator+=(const ClassCounts& other)
{
    if (values.empty()) {
        values.assign(other.values.size(), 0);
    }
    if (other.values.size() != values.size()) {
        throw std::invalid_argument("ClassCounts: length mismatch");
    }
    for (std::size_t c = 0; c < values.size(); ++c) {
        values[c] += other.values[c];
    }
    return *this;
}

Count l1_distance(const ClassCounts& a, const ClassCounts& b)
{
    if (a.size() != b.size()) {
        throw std::invalid_argument("l1_distance: length mismatch");
    }
    Count d = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        d += std::llabs(a[c] - b[c]);
    }
    return d;
}

std::size_t ActionVector::acquired() const noexcept
{
    return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace tiledrop
