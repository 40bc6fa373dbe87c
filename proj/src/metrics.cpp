#include "spinebench/metrics.hpp"

#include "point_index.hpp"
#include "spinebench/error.hpp"
#include "spinebench/volume_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace spinebench {

std::string to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::analysis: return "analysis";
        case EvalMode::ranking19: return "ranking19";
        case EvalMode::ranking20: return "ranking20";
    }
    return "analysis";
}

EvalMode parse_eval_mode(const std::string& text) {
    if (text == "analysis") return EvalMode::analysis;
    if (text == "ranking19") return EvalMode::ranking19;
    if (text == "ranking20") return EvalMode::ranking20;
    throw Error(ErrorCode::invalid_argument, "unknown evaluation mode '" + text + "'");
}

namespace {

using CodeCounts = std::array<std::int64_t, VertebraLabel::max_code + 1>;

template <typename Visit>
void for_each_surface_voxel(const LabelVolume& v, Visit&& visit) {
    const auto [nx, ny, nz] = v.dims();
    const auto vox = v.voxels();
    const std::int64_t sy = nx, sz = nx * ny;
    for (std::int64_t k = 0; k < nz; ++k) {
        for (std::int64_t j = 0; j < ny; ++j) {
            const std::size_t row = static_cast<std::size_t>(j * sy + k * sz);
            for (std::int64_t i = 0; i < nx; ++i) {
                const std::size_t n = row + static_cast<std::size_t>(i);
                const std::uint8_t c = vox[n];
                if (c == 0) continue;
                const bool boundary = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || k == 0 || k == nz - 1 ||
                                      vox[n - 1] != c || vox[n + 1] != c || vox[n - sy] != c ||
                                      vox[n + sy] != c || vox[n - sz] != c || vox[n + sz] != c;
                if (boundary) visit(c, i, j, k);
            }
        }
    }
}

CodeCounts intersection_counts(const LabelVolume& gt, const LabelVolume& pred) {
    CodeCounts both{};
    const auto a = gt.voxels();
    const auto b = pred.voxels();
    for (std::size_t n = 0; n < a.size(); ++n)
        if (a[n] == b[n]) ++both[a[n]];
    return both;
}

double directed_max_squared(std::span<const Point3> from, const detail::PointIndex& to, double floor) {
    double worst = floor;
    for (const auto& p : from) {
        const double d2 = to.nearest_squared(p, worst);
        if (d2 > worst) worst = d2;
    }
    return worst;
}

std::optional<double> mean_of(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace

std::map<VertebraLabel, SurfacePoints> extract_surfaces(const LabelVolume& volume) {
    std::array<std::vector<Point3>, VertebraLabel::max_code + 1> buckets;
    for_each_surface_voxel(volume, [&](std::uint8_t c, std::int64_t i, std::int64_t j, std::int64_t k) {
        buckets[c].push_back(volume.world(i, j, k));
    });
    std::map<VertebraLabel, SurfacePoints> out;
    for (int c = 1; c <= VertebraLabel::max_code; ++c)
        if (!buckets[static_cast<std::size_t>(c)].empty())
            out.emplace(VertebraLabel(c), SurfacePoints{std::move(buckets[static_cast<std::size_t>(c)])});
    return out;
}

SurfacePoints extract_surface(const LabelVolume& volume, VertebraLabel label) {
    if (!volume.contains(label))
        throw Error(ErrorCode::invalid_argument, "label " + label.name() + " is absent from the volume");
    SurfacePoints out;
    const auto code = static_cast<std::uint8_t>(label.code());
    for_each_surface_voxel(volume, [&](std::uint8_t c, std::int64_t i, std::int64_t j, std::int64_t k) {
        if (c == code) out.points.push_back(volume.world(i, j, k));
    });
    return out;
}

double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::empty_input, "Hausdorff distance of an empty point set");
    const detail::PointIndex index_a(a);
    const detail::PointIndex index_b(b);
    double worst = directed_max_squared(a, index_b, 0.0);
    worst = directed_max_squared(b, index_a, worst);
    return std::sqrt(worst);
}

std::map<VertebraLabel, double> dice_per_label(const LabelVolume& gt, const LabelVolume& pred) {
    require_same_grid(gt, pred);
    const auto both = intersection_counts(gt, pred);
    std::map<VertebraLabel, double> out;
    for (auto label : gt.labels()) {
        const auto c = static_cast<std::size_t>(label.code());
        const auto denom = gt.histogram()[c] + pred.histogram()[c];
        out[label] = 2.0 * static_cast<double>(both[c]) / static_cast<double>(denom);
    }
    return out;
}

std::map<VertebraLabel, std::optional<double>> hausdorff_per_label(const LabelVolume& gt,
                                                                 const LabelVolume& pred) {
    require_same_grid(gt, pred);
    const auto gt_surfaces = extract_surfaces(gt);
    const auto pred_surfaces = extract_surfaces(pred);
    std::map<VertebraLabel, std::optional<double>> out;
    for (const auto& [label, surface] : gt_surfaces) {
        auto it = pred_surfaces.find(label);
        if (it == pred_surfaces.end())
            out[label] = std::nullopt;
        else
            out[label] = hausdorff_distance(surface.points, it->second.points);
    }
    return out;
}

IdentificationResult identify(const CentroidSet& gt, const CentroidSet& pred) {
    IdentificationResult out;
    for (const auto& [label, truth] : gt.entries()) {
        Identification id;
        if (auto guess = pred.find(label)) {
            const double d = distance(*guess, truth);
            id.distance_mm = d;
            bool nearest = true;
            for (const auto& [other, other_truth] : gt.entries()) {
                if (other == label) continue;
                if (distance(*guess, other_truth) <= d) {
                    nearest = false;
                    break;
                }
            }
            id.identified = nearest && d < identification_radius_mm;
        }
        out.emplace(label, id);
    }
    return out;
}

ScanEvaluation evaluate_scan(std::string scan_id, const LabelVolume& gt_volume, const LabelVolume& pred_volume,
                             const CentroidSet& gt_centroids, const CentroidSet& pred_centroids, EvalMode mode) {
    ScanEvaluation ev;
    ev.scan_id = std::move(scan_id);
    ev.mode = mode;
    const bool substitute = mode == EvalMode::ranking19;

    // segmentation
    const auto dice = dice_per_label(gt_volume, pred_volume);
    const auto hd = hausdorff_per_label(gt_volume, pred_volume);
    std::vector<double> dice_values, hd_values;
    for (const auto& [label, value] : dice) {
        auto& rec = ev.per_vertebra[label];
        rec.dice = value;
        dice_values.push_back(value);
        const auto& h = hd.at(label);
        if (h)
            rec.hd_mm = *h;
        else if (substitute)
            rec.hd_mm = missing_hausdorff_mm;
        if (rec.hd_mm) hd_values.push_back(*rec.hd_mm);
    }
    for (auto label : pred_volume.labels())
        if (!gt_volume.contains(label)) ev.extra_pred_labels.push_back(label);

    // labelling
    const auto ids = identify(gt_centroids, pred_centroids);
    std::vector<double> distances;
    for (const auto& [label, id] : ids) {
        auto& rec = ev.per_vertebra[label];
        rec.identified = id.identified;
        if (id.distance_mm)
            rec.dist_mm = *id.distance_mm;
        else if (substitute)
            rec.dist_mm = missing_centroid_distance_mm;
        if (rec.dist_mm) distances.push_back(*rec.dist_mm);
        if (id.identified) ++ev.n_identified;
    }
    for (const auto& [label, p] : pred_centroids.entries()) {
        if (!gt_centroids.contains(label) && !gt_volume.contains(label) &&
            std::find(ev.extra_pred_labels.begin(), ev.extra_pred_labels.end(), label) ==
                ev.extra_pred_labels.end())
            ev.extra_pred_labels.push_back(label);
    }
    std::sort(ev.extra_pred_labels.begin(), ev.extra_pred_labels.end(), AnatomicalLess{});

    ev.n_gt = static_cast<int>(gt_centroids.size());
    if (ev.n_gt > 0) ev.id_rate = static_cast<double>(ev.n_identified) / ev.n_gt;
    ev.d_mean_mm = mean_of(distances);
    ev.dice_mean = mean_of(dice_values);
    ev.hd_mean_mm = mean_of(hd_values);
    return ev;
}

Summary summarize(std::vector<double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    s.median = values.size() % 2 == 1 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
    return s;
}

ScanLevelAggregate aggregate_scan_level(std::span<const ScanEvaluation> evals) {
    if (evals.empty()) throw Error(ErrorCode::empty_input, "cannot aggregate an empty cohort");
    std::vector<double> id, dm, dice, hd;
    for (const auto& e : evals) {
        if (e.id_rate) id.push_back(*e.id_rate);
        if (e.d_mean_mm) dm.push_back(*e.d_mean_mm);
        if (e.dice_mean) dice.push_back(*e.dice_mean);
        if (e.hd_mean_mm) hd.push_back(*e.hd_mean_mm);
    }
    return {summarize(std::move(id)), summarize(std::move(dm)), summarize(std::move(dice)),
            summarize(std::move(hd))};
}

DatasetLevelAggregate aggregate_dataset_level(std::span<const ScanEvaluation> evals) {
    if (evals.empty()) throw Error(ErrorCode::empty_input, "cannot aggregate an empty cohort");
    std::int64_t identified = 0, total = 0;
    std::vector<double> distances;
    for (const auto& e : evals) {
        identified += e.n_identified;
        total += e.n_gt;
        for (const auto& [label, rec] : e.per_vertebra)
            if (rec.dist_mm) distances.push_back(*rec.dist_mm);
    }
    DatasetLevelAggregate out;
    if (total > 0) out.id_rate = static_cast<double>(identified) / static_cast<double>(total);
    out.d_mean_mm = mean_of(distances);
    return out;
}

CohortAggregate aggregate_cohort(std::span<const ScanEvaluation> evals, AggregationLevel level) {
    CohortAggregate out;
    out.level = level;
    if (level == AggregationLevel::scan)
        out.scan = aggregate_scan_level(evals);
    else
        out.dataset = aggregate_dataset_level(evals);
    return out;
}

}  // namespace spinebench
