#pragma once

#include "spinebench/types.hpp"

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

namespace spinebench::detail {

/// Static k-d tree over world points for exact nearest-neighbour queries.
/// Nodes are implicit: the median of each index range is the node point.
class PointIndex {
public:
    explicit PointIndex(std::span<const Point3> points) : points_(points.begin(), points.end()) {
        axes_.resize(points_.size());
        build(0, points_.size());
    }

    /// Squared distance from q to its nearest indexed point. The search may
    /// stop as soon as some point within sqrt(good_enough) is seen; the return
    /// value is then only an upper bound that is <= good_enough.
    [[nodiscard]] double nearest_squared(const Point3& q,
                                         double good_enough = -1.0) const {
        double best = std::numeric_limits<double>::infinity();
        search(q, 0, points_.size(), best, good_enough);
        return best;
    }

private:
    static double coord(const Point3& p, int axis) { return axis == 0 ? p.x : (axis == 1 ? p.y : p.z); }

    void build(std::size_t lo, std::size_t hi) {
        if (hi - lo <= 1) return;
        Point3 mn = points_[lo], mx = points_[lo];
        for (std::size_t n = lo + 1; n < hi; ++n) {
            mn = {std::min(mn.x, points_[n].x), std::min(mn.y, points_[n].y), std::min(mn.z, points_[n].z)};
            mx = {std::max(mx.x, points_[n].x), std::max(mx.y, points_[n].y), std::max(mx.z, points_[n].z)};
        }
        const Point3 ext = mx - mn;
        const int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(points_.begin() + static_cast<std::ptrdiff_t>(lo),
                         points_.begin() + static_cast<std::ptrdiff_t>(mid),
                         points_.begin() + static_cast<std::ptrdiff_t>(hi),
                         [axis](const Point3& a, const Point3& b) { return coord(a, axis) < coord(b, axis); });
        axes_[mid] = static_cast<std::uint8_t>(axis);
        build(lo, mid);
        build(mid + 1, hi);
    }

    bool search(const Point3& q, std::size_t lo, std::size_t hi, double& best, double good_enough) const {
        if (lo >= hi) return false;
        const std::size_t mid = lo + (hi - lo) / 2;
        const Point3& p = points_[mid];
        const double dx = q.x - p.x, dy = q.y - p.y, dz = q.z - p.z;
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 < best) best = d2;
        if (best <= good_enough) return true;
        if (hi - lo == 1) return false;

        const int axis = axes_[mid];
        const double diff = coord(q, axis) - coord(p, axis);
        const bool left_first = diff < 0.0;
        if (left_first ? search(q, lo, mid, best, good_enough) : search(q, mid + 1, hi, best, good_enough))
            return true;
        // The squared plane distance never exceeds the true squared distance
        // of any point beyond it, also in floating point, so this prune is exact.
        if (diff * diff <= best) {
            if (left_first ? search(q, mid + 1, hi, best, good_enough) : search(q, lo, mid, best, good_enough))
                return true;
        }
        return false;
    }

    std::vector<Point3> points_;
    std::vector<std::uint8_t> axes_;
};

}  // namespace spinebench::detail
