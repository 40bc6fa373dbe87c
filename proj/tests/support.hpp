#pragma once

// Shared fixtures and brute-force oracles for the test suites.

#include "spinebench/labelseq.hpp"
#include "spinebench/types.hpp"

#include "temp_dir.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace spinebench;

/// Mutable voxel grid used to build LabelVolume fixtures.
struct Grid {
    Dims dims;
    std::vector<std::uint8_t> v;

    explicit Grid(Dims d) : dims(d), v(static_cast<std::size_t>(d[0] * d[1] * d[2]), 0) {}

    std::uint8_t& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return v[static_cast<std::size_t>(i + dims[0] * (j + dims[1] * k))];
    }
    std::uint8_t get(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return v[static_cast<std::size_t>(i + dims[0] * (j + dims[1] * k))];
    }
    void box(std::uint8_t code, std::array<std::int64_t, 3> lo, std::array<std::int64_t, 3> size) {
        for (std::int64_t k = lo[2]; k < lo[2] + size[2]; ++k)
            for (std::int64_t j = lo[1]; j < lo[1] + size[1]; ++j)
                for (std::int64_t i = lo[0]; i < lo[0] + size[0]; ++i) at(i, j, k) = code;
    }
    [[nodiscard]] LabelVolume volume(Spacing spacing = {1, 1, 1}, Point3 origin = {}) const {
        return LabelVolume(dims, spacing, diagonal_affine(spacing, origin), v);
    }
};

/// Random 6-connected-ish blob grown from a seed voxel.
inline void grow_blob(Grid& g, std::uint8_t code, std::mt19937_64& rng, int steps) {
    std::uniform_int_distribution<std::int64_t> px(0, g.dims[0] - 1), py(0, g.dims[1] - 1), pz(0, g.dims[2] - 1);
    std::int64_t i = px(rng), j = py(rng), k = pz(rng);
    std::uniform_int_distribution<int> dir(0, 5);
    for (int s = 0; s < steps; ++s) {
        g.at(i, j, k) = code;
        switch (dir(rng)) {
            case 0: i = std::min(i + 1, g.dims[0] - 1); break;
            case 1: i = std::max<std::int64_t>(i - 1, 0); break;
            case 2: j = std::min(j + 1, g.dims[1] - 1); break;
            case 3: j = std::max<std::int64_t>(j - 1, 0); break;
            case 4: k = std::min(k + 1, g.dims[2] - 1); break;
            default: k = std::max<std::int64_t>(k - 1, 0); break;
        }
    }
}

/// Surface voxels by direct neighbour inspection.
inline std::vector<Point3> brute_surface(const LabelVolume& vol, int code) {
    std::vector<Point3> out;
    const auto [nx, ny, nz] = vol.dims();
    auto code_at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> int {
        if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return -1;
        return vol.at(i, j, k);
    };
    for (std::int64_t k = 0; k < nz; ++k)
        for (std::int64_t j = 0; j < ny; ++j)
            for (std::int64_t i = 0; i < nx; ++i) {
                if (code_at(i, j, k) != code) continue;
                const bool boundary = code_at(i + 1, j, k) != code || code_at(i - 1, j, k) != code ||
                                      code_at(i, j + 1, k) != code || code_at(i, j - 1, k) != code ||
                                      code_at(i, j, k + 1) != code || code_at(i, j, k - 1) != code;
                if (boundary) out.push_back(vol.world(i, j, k));
            }
    return out;
}

/// All-pairs symmetric Hausdorff distance.
inline double brute_hausdorff(const std::vector<Point3>& a, const std::vector<Point3>& b) {
    auto directed = [](const std::vector<Point3>& from, const std::vector<Point3>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, squared_norm(p - q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

/// Dice by voxel counting.
inline double brute_dice(const std::vector<std::uint8_t>& gt, const std::vector<std::uint8_t>& pred, int code) {
    std::int64_t inter = 0, a = 0, b = 0;
    for (std::size_t n = 0; n < gt.size(); ++n) {
        a += gt[n] == code;
        b += pred[n] == code;
        inter += gt[n] == code && pred[n] == code;
    }
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

struct OracleChain {
    double score = -std::numeric_limits<double>::infinity();
    std::vector<int> nodes;
};

// Depth-first enumeration of every admissible chain. A physical candidate
// (source label and index) may appear at most once anywhere in the chain.
inline OracleChain brute_solve(const CandidateGraph& g, double* runner_up) {
    struct N {
        VertebraLabel label;
        const Candidate* c;
    };
    std::vector<N> nodes;
    for (const auto& [label, list] : g.candidates)
        for (const auto& c : list) nodes.push_back({label, &c});

    auto rank_seq_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
        for (std::size_t n = 0; n < a.size(); ++n) {
            const int ra = nodes[a[n]].label.anatomical_rank(), rb = nodes[b[n]].label.anatomical_rank();
            if (ra != rb) return ra < rb;
        }
        return a < b;
    };
    auto prefer = [&](const OracleChain& a, const OracleChain& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.nodes.size() != b.nodes.size()) return a.nodes.size() > b.nodes.size();
        return rank_seq_less(a.nodes, b.nodes);
    };

    OracleChain best;
    std::vector<double> all_scores;
    std::function<void(OracleChain&)> extend = [&](OracleChain& cur) {
        all_scores.push_back(cur.score);
        if (best.nodes.empty() || prefer(cur, best)) best = cur;
        const N& u = nodes[cur.nodes.back()];
        for (std::size_t v = 0; v < nodes.size(); ++v) {
            auto mv = g.stats.mean_vec.find({u.label, nodes[v].label});
            if (mv == g.stats.mean_vec.end()) continue;
            bool reused = false;
            for (int k : cur.nodes)
                reused |= nodes[k].c->source_label == nodes[v].c->source_label &&
                          nodes[k].c->source_index == nodes[v].c->source_index;
            if (reused) continue;
            const double before = cur.score;
            cur.score = before + pairwise_term(mv->second, nodes[v].c->position - u.c->position, g.params.lambda) +
                        g.unary(*nodes[v].c);
            cur.nodes.push_back(static_cast<int>(v));
            extend(cur);
            cur.nodes.pop_back();
            cur.score = before;
        }
    };
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        OracleChain start{g.unary(*nodes[n].c), {static_cast<int>(n)}};
        extend(start);
    }
    *runner_up = -std::numeric_limits<double>::infinity();
    for (double s : all_scores)
        if (s < best.score) *runner_up = std::max(*runner_up, s);
    return best;
}

}  // namespace testing
