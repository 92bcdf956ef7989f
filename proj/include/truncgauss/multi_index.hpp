#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "truncgauss/errors.hpp"

namespace truncgauss {

// Multi-index V in N^d; V[i] is the per-coordinate degree.
struct MultiIndex {
    std::vector<int> entries;

    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> e) : entries(std::move(e)) {
        for (int v : entries)
            if (v < 0) throw validation_error("MultiIndex entries must be non-negative");
    }

    int dim() const { return static_cast<int>(entries.size()); }
    int degree() const { return std::accumulate(entries.begin(), entries.end(), 0); }
    int operator[](int i) const { return entries[static_cast<std::size_t>(i)]; }

    bool operator==(const MultiIndex& other) const { return entries == other.entries; }
};

// Saturates at UINT64_MAX instead of overflowing.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 0; i < k; ++i) {
        const std::uint64_t factor = n - i;
        const std::uint64_t quotient = result / (i + 1);
        if (quotient > std::numeric_limits<std::uint64_t>::max() / factor - 1)
            return std::numeric_limits<std::uint64_t>::max();
        result = quotient * factor + result % (i + 1) * factor / (i + 1);
    }
    return result;
}

namespace detail {

inline void enumerate_rec(int remaining_slots, int budget, std::vector<int>& prefix,
                          std::vector<MultiIndex>& out) {
    if (remaining_slots == 1) {
        prefix.push_back(budget);
        out.push_back(MultiIndex(prefix));
        prefix.pop_back();
        return;
    }
    for (int v = budget; v >= 0; --v) {
        prefix.push_back(v);
        enumerate_rec(remaining_slots - 1, budget - v, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace detail

// All V with |V| <= k in graded lexicographic order: ascending total degree,
// and within a degree block descending lexicographic comparison of entries.
// d=2, k=1 enumerates as (0,0), (1,0), (0,1).
inline std::vector<MultiIndex> enumerate_multi_indices(int d, int k) {
    if (d < 1) throw validation_error("enumerate_multi_indices: d must be >= 1");
    if (k < 0) throw validation_error("enumerate_multi_indices: k must be >= 0");
    const std::uint64_t count = binomial(static_cast<std::uint64_t>(d) + k, k);
    if (count > (1ULL << 31))
        throw size_error("enumerate_multi_indices: index count exceeds 2^31");
    std::vector<MultiIndex> out;
    out.reserve(count);
    std::vector<int> prefix;
    for (int degree = 0; degree <= k; ++degree) {
        if (d == 1) {
            out.push_back(MultiIndex({degree}));
        } else {
            for (int v = degree; v >= 0; --v) {
                prefix.push_back(v);
                detail::enumerate_rec(d - 1, degree - v, prefix, out);
                prefix.pop_back();
            }
        }
    }
    return out;
}

}  // namespace truncgauss
