#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "lesionforge/error.hpp"

namespace lesionforge {

struct WilcoxonResult {
    double statistic = 0.0;  ///< min(W+, W-)
    double p_value = 1.0;    ///< two-sided
    std::size_t n = 0;       ///< pairs left after dropping zero differences
    bool exact = false;
};

/// Average ranks (1-based) of `values`; ties share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Number of subsets of {1..n} for each possible rank sum 0..n(n+1)/2.
inline std::vector<std::uint64_t> signed_rank_counts(std::size_t n) {
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<std::uint64_t> c(max_sum + 1, 0);
    c[0] = 1;
    for (std::size_t k = 1; k <= n; ++k)
        for (std::size_t s = max_sum; s >= k; --s) c[s] += c[s - k];
    return c;
}

/// Largest sample size handled by the exact null distribution.
inline constexpr std::size_t kWilcoxonExactMax = 25;

/// Paired two-sided Wilcoxon signed-rank test. Zero differences are dropped.
/// Without ties and with n <= 25 the exact null distribution is used;
/// otherwise the normal approximation with tie correction (no continuity
/// correction).
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("wilcoxon: samples differ in length");
    if (a.empty()) throw DomainError("wilcoxon: empty samples");

    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0) diff.push_back(a[i] - b[i]);
    WilcoxonResult r;
    r.n = diff.size();
    if (diff.empty()) return r;

    std::vector<double> mags(diff.size());
    std::transform(diff.begin(), diff.end(), mags.begin(), [](double d) { return std::abs(d); });
    const auto ranks = average_ranks(mags);
    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? w_plus : w_minus) += ranks[i];
    r.statistic = std::min(w_plus, w_minus);

    std::vector<double> sorted = mags;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    bool ties = false;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const auto t = static_cast<double>(j - i + 1);
        if (t > 1) ties = true;
        tie_term += t * t * t - t;
        i = j + 1;
    }

    const auto n = static_cast<double>(r.n);
    if (!ties && r.n <= kWilcoxonExactMax) {
        const auto counts = signed_rank_counts(r.n);
        const auto t = static_cast<std::size_t>(r.statistic);
        std::uint64_t at_most = 0;
        for (std::size_t s = 0; s <= t; ++s) at_most += counts[s];
        r.p_value = std::min(1.0, 2.0 * static_cast<double>(at_most) / std::ldexp(1.0, static_cast<int>(r.n)));
        r.exact = true;
        return r;
    }
    const double mean = n * (n + 1) / 4.0;
    const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
    const double z = (r.statistic - mean) / std::sqrt(var);
    r.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    return r;
}

}  // namespace lesionforge
