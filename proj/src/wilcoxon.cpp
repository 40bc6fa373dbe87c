#include "spinebench/error.hpp"
#include "spinebench/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace spinebench {

namespace {

struct SignedRanks {
    /// Twice the mid-rank of each non-zero difference, so ties stay integral.
    std::vector<int> doubled_ranks;
    std::vector<bool> positive;
    /// Sizes of tie groups among |d|.
    std::vector<std::size_t> tie_sizes;
};

SignedRanks rank_differences(std::span<const double> x, std::span<const double> y) {
    std::vector<double> d;
    for (std::size_t n = 0; n < x.size(); ++n) {
        const double diff = x[n] - y[n];
        if (!std::isfinite(diff)) throw Error(ErrorCode::invalid_argument, "non-finite sample value");
        if (diff != 0.0) d.push_back(diff);
    }
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

    SignedRanks out;
    out.doubled_ranks.resize(d.size());
    out.positive.resize(d.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        // positions i..j (0-based) share the mid-rank ((i+1)+(j+1))/2
        const int doubled = static_cast<int>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) {
            out.doubled_ranks[order[k]] = doubled;
            out.positive[order[k]] = d[order[k]] > 0.0;
        }
        out.tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return out;
}

/// Number of sign assignments per attainable doubled positive-rank sum.
std::vector<double> sign_pattern_counts(const std::vector<int>& doubled_ranks) {
    const int total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled_ranks) {
        for (int s = reach; s >= 0; --s)
            if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        reach += r;
    }
    return counts;
}

double exact_p(const SignedRanks& ranks, int doubled_statistic, Alternative alt) {
    const auto counts = sign_pattern_counts(ranks.doubled_ranks);
    double tail = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
        const bool in_tail = alt == Alternative::greater ? static_cast<int>(s) >= doubled_statistic
                                                         : static_cast<int>(s) <= doubled_statistic;
        if (in_tail) tail += counts[s];
    }
    return std::ldexp(tail, -static_cast<int>(ranks.doubled_ranks.size()));
}

double normal_p(const SignedRanks& ranks, double statistic, Alternative alt) {
    const auto m = static_cast<double>(ranks.doubled_ranks.size());
    const double mean = m * (m + 1.0) / 4.0;
    double var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0;
    for (auto t : ranks.tie_sizes) {
        const auto tt = static_cast<double>(t);
        var -= (tt * tt * tt - tt) / 48.0;
    }
    const double sd = std::sqrt(var);
    const double z = alt == Alternative::greater ? (statistic - mean - 0.5) / sd : -(statistic - mean + 0.5) / sd;
    // p stays strictly positive even where erfc underflows
    return std::max(0.5 * std::erfc(z / std::sqrt(2.0)), std::numeric_limits<double>::denorm_min());
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, Alternative alternative,
                                    PValueMethod method) {
    if (x.size() != y.size()) throw Error(ErrorCode::invalid_argument, "paired samples differ in length");
    if (x.empty()) throw Error(ErrorCode::empty_input, "Wilcoxon test needs at least one pair");

    const auto ranks = rank_differences(x, y);
    WilcoxonResult out;
    out.n_nonzero = ranks.doubled_ranks.size();
    int doubled_stat = 0;
    for (std::size_t n = 0; n < ranks.doubled_ranks.size(); ++n)
        if (ranks.positive[n]) doubled_stat += ranks.doubled_ranks[n];
    out.statistic = doubled_stat / 2.0;
    if (out.n_nonzero == 0) return out;

    out.exact = method == PValueMethod::exact ||
                (method == PValueMethod::automatic && out.n_nonzero <= wilcoxon_exact_limit);
    out.p_value = out.exact ? exact_p(ranks, doubled_stat, alternative)
                            : normal_p(ranks, out.statistic, alternative);
    return out;
}

}  // namespace spinebench
