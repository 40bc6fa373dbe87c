#include "doctest.h"

#include "spinebench/error.hpp"
#include "spinebench/ranking.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace spinebench;

namespace {

struct Enumerated {
    double p_greater;
    double p_less;
    double p_equal;
    double statistic;
};

// Enumerates every sign pattern over the mid-ranks of the non-zero |d|.
Enumerated enumerate(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> d;
    for (std::size_t n = 0; n < x.size(); ++n)
        if (x[n] != y[n]) d.push_back(x[n] - y[n]);
    const std::size_t m = d.size();
    std::vector<double> rank(m);
    for (std::size_t a = 0; a < m; ++a) {
        double below = 0, equal = 0;
        for (std::size_t b = 0; b < m; ++b) {
            below += std::abs(d[b]) < std::abs(d[a]);
            equal += std::abs(d[b]) == std::abs(d[a]);
        }
        rank[a] = below + (equal + 1.0) / 2.0;
    }
    double observed = 0;
    for (std::size_t a = 0; a < m; ++a)
        if (d[a] > 0) observed += rank[a];

    std::size_t ge = 0, le = 0, eq = 0;
    const std::size_t patterns = std::size_t{1} << m;
    for (std::size_t mask = 0; mask < patterns; ++mask) {
        double w = 0;
        for (std::size_t a = 0; a < m; ++a)
            if (mask >> a & 1) w += rank[a];
        ge += w >= observed - 1e-9;
        le += w <= observed + 1e-9;
        eq += std::abs(w - observed) < 1e-9;
    }
    const double total = static_cast<double>(patterns);
    return {static_cast<double>(ge) / total, static_cast<double>(le) / total, static_cast<double>(eq) / total, observed};
}

}  // namespace

TEST_CASE("six positive differences") {
    const std::vector<double> x{1.1, 2.2, 3.3, 4.4, 5.5, 6.6}, y(6, 0.0);
    const auto g = wilcoxon_signed_rank(x, y, Alternative::greater);
    CHECK(g.statistic == 21.0);
    CHECK(g.p_value == 0.015625);
    CHECK(g.exact);
    CHECK(g.n_nonzero == 6);
    CHECK(wilcoxon_signed_rank(x, y, Alternative::less).p_value == 1.0);
}

TEST_CASE("all-zero differences give no decision") {
    const std::vector<double> x{1, 2, 3};
    const auto r = wilcoxon_signed_rank(x, x, Alternative::greater);
    CHECK_FALSE(r.decided());
    CHECK(r.n_nonzero == 0);
    CHECK(r.statistic == 0.0);
}

TEST_CASE("argument errors") {
    const std::vector<double> a{1, 2}, b{1};
    CHECK_THROWS_AS((void)wilcoxon_signed_rank(a, b, Alternative::greater), Error);
    CHECK_THROWS_AS((void)wilcoxon_signed_rank(std::vector<double>{}, std::vector<double>{}, Alternative::greater), Error);
    const std::vector<double> bad{1, std::nan("")};
    CHECK_THROWS_AS((void)wilcoxon_signed_rank(bad, a, Alternative::greater), Error);
}

TEST_CASE("exact p-values match full sign enumeration, ties included") {
    std::mt19937_64 rng(47);
    std::uniform_int_distribution<int> len(1, 15);
    std::uniform_int_distribution<int> small(-4, 4);
    std::uniform_real_distribution<double> real(-1.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = len(rng);
        std::vector<double> x(n), y(n);
        const bool ties = trial % 2 == 0;
        for (int k = 0; k < n; ++k) {
            x[k] = ties ? small(rng) : real(rng);
            y[k] = ties ? small(rng) : real(rng);
        }
        const auto g = wilcoxon_signed_rank(x, y, Alternative::greater, PValueMethod::exact);
        const auto l = wilcoxon_signed_rank(x, y, Alternative::less, PValueMethod::exact);
        if (!g.decided()) {
            CHECK_FALSE(l.decided());
            continue;
        }
        const auto oracle = enumerate(x, y);
        CHECK(g.statistic == oracle.statistic);
        CHECK(*g.p_value == doctest::Approx(oracle.p_greater).epsilon(1e-12));
        CHECK(*l.p_value == doctest::Approx(oracle.p_less).epsilon(1e-12));
        CHECK(*g.p_value + *l.p_value - oracle.p_equal == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("automatic mode switches to the normal approximation above the exact limit") {
    std::vector<double> x(26), y(26, 0.0);
    for (int k = 0; k < 26; ++k) x[k] = k % 3 == 0 ? -(k + 1.0) : k + 1.0;
    CHECK_FALSE(wilcoxon_signed_rank(x, y, Alternative::greater).exact);
    CHECK(wilcoxon_signed_rank(std::span(x).first(25), std::span(y).first(25), Alternative::greater).exact);
    CHECK_FALSE(wilcoxon_signed_rank(std::span(x).first(10), std::span(y).first(10), Alternative::greater,
                                     PValueMethod::normal)
                    .exact);
}

TEST_CASE("normal approximation is close to the exact distribution for 20 to 25 pairs") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(-1.0, 1.5);
    for (int m = 20; m <= 25; ++m) {
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> x(m), y(m, 0.0);
            for (auto& v : x) v = u(rng);
            for (auto alt : {Alternative::greater, Alternative::less}) {
                const auto e = wilcoxon_signed_rank(x, y, alt, PValueMethod::exact);
                const auto n = wilcoxon_signed_rank(x, y, alt, PValueMethod::normal);
                CHECK(std::abs(*e.p_value - *n.p_value) < 0.01);
            }
        }
    }
}

TEST_CASE("forty consistent wins reach 2^-40") {
    std::vector<double> x(40), y(40);
    for (int k = 0; k < 40; ++k) {
        x[k] = 0.9 + k * 1e-3;
        y[k] = 0.5;
    }
    const auto r = wilcoxon_signed_rank(x, y, Alternative::greater, PValueMethod::exact);
    CHECK(r.p_value == std::ldexp(1.0, -40));
    CHECK(*wilcoxon_signed_rank(x, y, Alternative::greater).p_value < default_significance);
}

TEST_CASE("swapping samples swaps the tails") {
    std::mt19937_64 rng(59);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(12), y(12);
        for (auto& v : x) v = z(rng);
        for (auto& v : y) v = z(rng);
        CHECK(wilcoxon_signed_rank(x, y, Alternative::greater).p_value ==
              wilcoxon_signed_rank(y, x, Alternative::less).p_value);
    }
}
