#include "spinebench/types.hpp"

#include "spinebench/error.hpp"

#include <algorithm>

namespace spinebench {

VertebraLabel::VertebraLabel(int code) : code_(code) {
    if (!is_valid(code))
        throw Error(ErrorCode::invalid_label, "invalid vertebra label code " + std::to_string(code));
}

std::string VertebraLabel::name() const {
    if (code_ <= 7) return "C" + std::to_string(code_);
    if (code_ <= 19) return "T" + std::to_string(code_ - 7);
    if (code_ == 28) return "T13";
    return "L" + std::to_string(code_ - 19);
}

const std::vector<VertebraLabel>& all_labels() {
    static const std::vector<VertebraLabel> labels = [] {
        std::vector<VertebraLabel> out;
        for (int c = 1; c <= VertebraLabel::max_code; ++c)
            if (VertebraLabel::is_valid(c)) out.emplace_back(c);
        std::sort(out.begin(), out.end(), AnatomicalLess{});
        return out;
    }();
    return labels;
}

Affine diagonal_affine(const Spacing& spacing, const Point3& origin) {
    Affine a{};
    a[0] = {spacing[0], 0.0, 0.0, origin.x};
    a[1] = {0.0, spacing[1], 0.0, origin.y};
    a[2] = {0.0, 0.0, spacing[2], origin.z};
    a[3] = {0.0, 0.0, 0.0, 1.0};
    return a;
}

Point3 apply_affine(const Affine& a, double i, double j, double k) {
    return {a[0][0] * i + a[0][1] * j + a[0][2] * k + a[0][3],
            a[1][0] * i + a[1][1] * j + a[1][2] * k + a[1][3],
            a[2][0] * i + a[2][1] * j + a[2][2] * k + a[2][3]};
}

double determinant3(const Affine& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

LabelVolume::LabelVolume(Dims dims, Spacing spacing, Affine affine, std::vector<std::uint8_t> voxels)
    : dims_(dims), spacing_(spacing), affine_(affine), voxels_(std::move(voxels)) {
    std::int64_t n = 1;
    for (auto d : dims_) {
        if (d <= 0) throw Error(ErrorCode::format, "volume dimensions must be positive");
        n *= d;
    }
    if (static_cast<std::size_t>(n) != voxels_.size())
        throw Error(ErrorCode::format, "voxel buffer size does not match dimensions");
    for (auto s : spacing_)
        if (!(s > 0.0) || !std::isfinite(s))
            throw Error(ErrorCode::format, "voxel spacing must be positive");
    const double det = determinant3(affine_);
    if (!std::isfinite(det) || det == 0.0)
        throw Error(ErrorCode::format, "affine is not invertible");

    for (std::size_t idx = 0; idx < voxels_.size(); ++idx) {
        const auto v = voxels_[idx];
        if (v > VertebraLabel::max_code || (v != 0 && !VertebraLabel::is_valid(v))) {
            const auto i = static_cast<std::int64_t>(idx) % dims_[0];
            const auto j = (static_cast<std::int64_t>(idx) / dims_[0]) % dims_[1];
            const auto k = static_cast<std::int64_t>(idx) / (dims_[0] * dims_[1]);
            throw Error(ErrorCode::invalid_label,
                        "invalid label code " + std::to_string(v) + " at voxel (" + std::to_string(i) +
                            "," + std::to_string(j) + "," + std::to_string(k) + ")");
        }
        ++histogram_[v];
    }
}

std::vector<VertebraLabel> LabelVolume::labels() const {
    std::vector<VertebraLabel> out;
    for (auto l : all_labels())
        if (contains(l)) out.push_back(l);
    return out;
}

void CentroidSet::insert(VertebraLabel label, const Point3& position) {
    if (!position.finite())
        throw Error(ErrorCode::format, "non-finite coordinate for label " + label.name());
    if (!entries_.emplace(label, position).second)
        throw Error(ErrorCode::format, "duplicate centroid label " + label.name());
}

std::optional<Point3> CentroidSet::find(VertebraLabel label) const {
    auto it = entries_.find(label);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

}  // namespace spinebench
