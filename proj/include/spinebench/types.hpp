#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinebench {

/// Vertebra class code. 1-7 are C1-C7, 8-19 T1-T12, 20-24 L1-L5, 25 L6 and 28 T13.
class VertebraLabel {
public:
    static constexpr int max_code = 28;

    constexpr VertebraLabel() = default;

    /// Throws Error(invalid_label) for codes outside {1..25, 28}.
    explicit VertebraLabel(int code);

    [[nodiscard]] static constexpr bool is_valid(int code) noexcept {
        return (code >= 1 && code <= 25) || code == 28;
    }

    [[nodiscard]] constexpr int code() const noexcept { return code_; }

    /// Position along the cranio-caudal chain; T13 sits between T12 and L1.
    [[nodiscard]] constexpr int anatomical_rank() const noexcept {
        return code_ == 28 ? 39 : 2 * code_;
    }

    [[nodiscard]] std::string name() const;

    friend constexpr auto operator<=>(VertebraLabel, VertebraLabel) = default;

private:
    int code_ = 1;
};

/// All 26 valid labels in anatomical order (C1 .. T12, T13, L1 .. L6).
[[nodiscard]] const std::vector<VertebraLabel>& all_labels();

struct AnatomicalLess {
    bool operator()(VertebraLabel a, VertebraLabel b) const noexcept {
        return a.anatomical_rank() < b.anatomical_rank();
    }
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    [[nodiscard]] bool finite() const noexcept {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }

[[nodiscard]] inline double squared_norm(const Point3& a) { return a.x * a.x + a.y * a.y + a.z * a.z; }
[[nodiscard]] inline double norm(const Point3& a) { return std::sqrt(squared_norm(a)); }
[[nodiscard]] inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

using Dims = std::array<std::int64_t, 3>;
using Spacing = std::array<double, 3>;
/// Row-major voxel-index to world-mm transform.
using Affine = std::array<std::array<double, 4>, 4>;

[[nodiscard]] Affine diagonal_affine(const Spacing& spacing, const Point3& origin = {});
[[nodiscard]] Point3 apply_affine(const Affine& affine, double i, double j, double k);
[[nodiscard]] double determinant3(const Affine& affine);

/// Dense 3D label grid, x fastest. Immutable after construction.
class LabelVolume {
public:
    /// Validates dims/voxel count, positive spacing, invertible affine and every voxel code.
    LabelVolume(Dims dims, Spacing spacing, Affine affine, std::vector<std::uint8_t> voxels);

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] const Spacing& spacing() const noexcept { return spacing_; }
    [[nodiscard]] const Affine& affine() const noexcept { return affine_; }
    [[nodiscard]] std::span<const std::uint8_t> voxels() const noexcept { return voxels_; }
    [[nodiscard]] std::size_t voxel_count() const noexcept { return voxels_.size(); }

    [[nodiscard]] std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
        return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
    }
    [[nodiscard]] std::uint8_t at(std::int64_t i, std::int64_t j, std::int64_t k) const noexcept {
        return voxels_[index(i, j, k)];
    }
    [[nodiscard]] Point3 world(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return apply_affine(affine_, static_cast<double>(i), static_cast<double>(j),
                            static_cast<double>(k));
    }

    /// Voxel count per code, indexed 0..28.
    [[nodiscard]] const std::array<std::int64_t, VertebraLabel::max_code + 1>& histogram() const noexcept {
        return histogram_;
    }
    [[nodiscard]] bool contains(VertebraLabel label) const noexcept {
        return histogram_[static_cast<std::size_t>(label.code())] > 0;
    }
    /// Present labels in anatomical order.
    [[nodiscard]] std::vector<VertebraLabel> labels() const;

private:
    Dims dims_;
    Spacing spacing_;
    Affine affine_;
    std::vector<std::uint8_t> voxels_;
    std::array<std::int64_t, VertebraLabel::max_code + 1> histogram_{};
};

/// Per-vertebra 3D landmarks in world mm.
class CentroidSet {
public:
    using Map = std::map<VertebraLabel, Point3, AnatomicalLess>;

    CentroidSet() = default;

    /// Throws on duplicate labels or non-finite coordinates.
    void insert(VertebraLabel label, const Point3& position);

    [[nodiscard]] const Map& entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool contains(VertebraLabel label) const { return entries_.count(label) != 0; }
    [[nodiscard]] std::optional<Point3> find(VertebraLabel label) const;

    friend bool operator==(const CentroidSet&, const CentroidSet&) = default;

private:
    Map entries_;
};

}  // namespace spinebench
