#pragma once

#include "spinebench/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinebench {

enum class EvalMode { analysis, ranking19, ranking20 };

[[nodiscard]] std::string to_string(EvalMode mode);
[[nodiscard]] EvalMode parse_eval_mode(const std::string& text);

/// A GT vertebra counts as identified only below this localisation error.
inline constexpr double identification_radius_mm = 20.0;
/// Ranking-mode stand-ins for missing vertebra predictions.
inline constexpr double missing_centroid_distance_mm = 1000.0;
inline constexpr double missing_hausdorff_mm = 100.0;

/// Boundary-voxel centers of one label in world mm.
struct SurfacePoints {
    std::vector<Point3> points;
};

/// A voxel is on the surface if any of its six face neighbours carries a
/// different code; outside the grid counts as different.
[[nodiscard]] SurfacePoints extract_surface(const LabelVolume& volume, VertebraLabel label);

/// All label surfaces in one sweep.
[[nodiscard]] std::map<VertebraLabel, SurfacePoints> extract_surfaces(const LabelVolume& volume);

/// Symmetric Hausdorff distance between two non-empty point clouds (exact).
[[nodiscard]] double hausdorff_distance(std::span<const Point3> a, std::span<const Point3> b);

/// Dice per GT label; 0 where the prediction lacks the label.
[[nodiscard]] std::map<VertebraLabel, double> dice_per_label(const LabelVolume& gt, const LabelVolume& pred);

/// Hausdorff per GT label; empty optional where the prediction lacks the label.
[[nodiscard]] std::map<VertebraLabel, std::optional<double>> hausdorff_per_label(const LabelVolume& gt,
                                                                               const LabelVolume& pred);

struct Identification {
    bool identified = false;
    std::optional<double> distance_mm;
};

using IdentificationResult = std::map<VertebraLabel, Identification, AnatomicalLess>;

/// Vertebra i is identified when its same-label prediction is strictly closest
/// to x_i among all GT centroids and lies within 20 mm of it.
[[nodiscard]] IdentificationResult identify(const CentroidSet& gt, const CentroidSet& pred);

struct VertebraRecord {
    std::optional<double> dice;
    std::optional<double> hd_mm;
    std::optional<bool> identified;
    std::optional<double> dist_mm;

    friend bool operator==(const VertebraRecord&, const VertebraRecord&) = default;
};

struct LabelShift {
    int best_shift = 0;
    double dice_gain = 0.0;
    bool flagged = false;

    friend bool operator==(const LabelShift&, const LabelShift&) = default;
};

struct ScanEvaluation {
    std::string scan_id;
    EvalMode mode = EvalMode::analysis;
    /// Number of GT centroids.
    int n_gt = 0;
    /// Number of identified GT centroids.
    int n_identified = 0;
    std::map<VertebraLabel, VertebraRecord, AnatomicalLess> per_vertebra;
    std::optional<double> id_rate;
    std::optional<double> d_mean_mm;
    std::optional<double> dice_mean;
    std::optional<double> hd_mean_mm;
    std::vector<VertebraLabel> extra_pred_labels;
    std::optional<LabelShift> label_shift;

    friend bool operator==(const ScanEvaluation&, const ScanEvaluation&) = default;
};

/// Segmentation metrics come from the volumes, labelling metrics from the
/// centroid sets; an empty GT centroid set leaves the labelling fields unset.
[[nodiscard]] ScanEvaluation evaluate_scan(std::string scan_id, const LabelVolume& gt_volume,
                                           const LabelVolume& pred_volume, const CentroidSet& gt_centroids,
                                           const CentroidSet& pred_centroids, EvalMode mode);

struct Summary {
    std::size_t count = 0;
    std::optional<double> mean;
    std::optional<double> median;

    friend bool operator==(const Summary&, const Summary&) = default;
};

[[nodiscard]] Summary summarize(std::vector<double> values);

struct ScanLevelAggregate {
    Summary id_rate;
    Summary d_mean_mm;
    Summary dice_mean;
    Summary hd_mean_mm;

    friend bool operator==(const ScanLevelAggregate&, const ScanLevelAggregate&) = default;
};

struct DatasetLevelAggregate {
    std::optional<double> id_rate;
    std::optional<double> d_mean_mm;

    friend bool operator==(const DatasetLevelAggregate&, const DatasetLevelAggregate&) = default;
};

enum class AggregationLevel { scan, dataset };

struct CohortAggregate {
    AggregationLevel level = AggregationLevel::scan;
    std::optional<ScanLevelAggregate> scan;
    std::optional<DatasetLevelAggregate> dataset;
};

/// Scan level: mean/median of per-scan values. Dataset level: id.rate and
/// d_mean pooled over all vertebrae of all scans. Throws on an empty cohort.
[[nodiscard]] CohortAggregate aggregate_cohort(std::span<const ScanEvaluation> evals, AggregationLevel level);
[[nodiscard]] ScanLevelAggregate aggregate_scan_level(std::span<const ScanEvaluation> evals);
[[nodiscard]] DatasetLevelAggregate aggregate_dataset_level(std::span<const ScanEvaluation> evals);

}  // namespace spinebench
