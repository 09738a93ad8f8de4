#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace tiledrop {

using Count = std::int64_t;

// L-dimensional non-negative object counts, one entry per class.
struct ClassCounts {
    std::vector<Count> values;

    ClassCounts() = default;
    explicit ClassCounts(std::size_t num_classes) : values(num_classes, 0) {}
    explicit ClassCounts(std::vector<Count> v) : values(std::move(v)) {}

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] Count total() const noexcept;
    [[nodiscard]] bool is_zero() const noexcept;

    Count& operator[](std::size_t c) { return values[c]; }
    Count operator[](std::size_t c) const { return values[c]; }

    ClassCounts& operator+=(const ClassCounts& other);
    friend ClassCounts operator+(ClassCounts lhs, const ClassCounts& rhs) { return lhs += rhs; }
    friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

// Sum of |a_c - b_c|.
Count l1_distance(const ClassCounts& a, const ClassCounts& b);

// Binary acquisition decisions over the S subtiles of one tile.
struct ActionVector {
    std::vector<std::uint8_t> a;

    ActionVector() = default;
    explicit ActionVector(std::size_t num_subtiles, bool value = false) : a(num_subtiles, value ? 1 : 0) {}
    explicit ActionVector(std::vector<std::uint8_t> v) : a(std::move(v)) {}

    [[nodiscard]] std::size_t size() const noexcept { return a.size(); }
    [[nodiscard]] std::size_t acquired() const noexcept;
    bool operator[](std::size_t k) const { return a[k] != 0; }
    friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

}  // namespace tiledrop
