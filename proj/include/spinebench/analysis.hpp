#pragma once

#include "spinebench/metrics.hpp"
#include "spinebench/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace spinebench {

enum class Region { cervical, thoracic, lumbar };

/// T13 is thoracic and L6 lumbar.
[[nodiscard]] Region region_of(VertebraLabel label);
[[nodiscard]] std::string to_string(Region region);

struct GroupMeans {
    std::size_t records = 0;
    std::optional<double> id_rate;
    std::optional<double> dice;
    std::optional<double> hd_mm;
    std::optional<double> d_mean_mm;
};

struct MetricGroup {
    std::string name;
    /// Empty when no vertebra of the cohort falls into the group.
    std::optional<GroupMeans> means;
};

enum class GroupBy { vertebra, region };

/// Means over every per-vertebra record of the cohort, one entry per
/// canonical group (all 26 vertebrae, or the three regions) in anatomical order.
[[nodiscard]] std::vector<MetricGroup> group_metrics(std::span<const ScanEvaluation> evals, GroupBy by);

enum class FovCategory {
    ct_plus_c1,
    ct_minus_c1,
    tl_plus_l5,
    tl_minus_l5,
    ctl_plus_c1_l5,
    ctl_minus_c1_or_l5,
    uncovered,
};

[[nodiscard]] std::string to_string(FovCategory category);
[[nodiscard]] const std::vector<FovCategory>& all_fov_categories();

/// Field-of-view bucket from the landmarks visible in a GT label set:
/// cranium (C1), cervico-thoracic junction (C7+T1), thoraco-lumbar junction
/// (T12 or T13 with L1) and last lumbar vertebra (L5 or L6).
[[nodiscard]] FovCategory fov_category(const std::set<VertebraLabel>& gt_labels);

/// GT labels seen by a scan evaluation (volume or centroid annotations).
[[nodiscard]] std::set<VertebraLabel> gt_labels_of(const ScanEvaluation& eval);

enum class CurveMetric { id_rate, dice_mean };
[[nodiscard]] std::string to_string(CurveMetric metric);

struct SuccessCurve {
    std::vector<double> taus;
    std::vector<double> fractions;
};

/// Fraction of scans whose metric is >= tau, for each tau (ascending).
/// Scans without a value for the metric are left out.
[[nodiscard]] SuccessCurve success_curve(std::span<const ScanEvaluation> evals, CurveMetric metric,
                                         std::span<const double> taus);

struct FailureCounts {
    double threshold = 0.05;
    std::size_t id_rate = 0;
    std::size_t dice = 0;
    std::size_t scans = 0;
};

/// Scans with id.rate or mean Dice strictly below `threshold`.
[[nodiscard]] FailureCounts failure_table(std::span<const ScanEvaluation> evals, double threshold = 0.05);

struct TransitionalSplit {
    std::vector<std::string> rare_scans;
    std::vector<std::string> normal_scans;
    std::optional<ScanLevelAggregate> rare;
    std::optional<ScanLevelAggregate> normal;
};

/// Splits by presence of a transitional vertebra (L6 or T13) in the GT labels.
[[nodiscard]] TransitionalSplit transitional_split(std::span<const ScanEvaluation> evals,
                                                   const std::map<std::string, std::set<VertebraLabel>>& gt_label_sets);

inline constexpr double label_shift_flag_gain = 0.1;

/// Tries relabelling the prediction by each shift along the chain C1..L6
/// (T13 stays fixed, codes leaving the chain are dropped) and reports the
/// shift with the best mean GT Dice.
[[nodiscard]] LabelShift detect_label_shift(const LabelVolume& gt, const LabelVolume& pred, int min_shift = -2,
                                            int max_shift = 2, double flag_gain = label_shift_flag_gain);

}  // namespace spinebench
