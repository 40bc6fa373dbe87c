#include "spinebench/analysis.hpp"

#include "spinebench/error.hpp"
#include "spinebench/volume_io.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace spinebench {

Region region_of(VertebraLabel label) {
    const int c = label.code();
    if (c <= 7) return Region::cervical;
    if (c <= 19 || c == 28) return Region::thoracic;
    return Region::lumbar;
}

std::string to_string(Region region) {
    switch (region) {
        case Region::cervical: return "cervical";
        case Region::thoracic: return "thoracic";
        case Region::lumbar: return "lumbar";
    }
    return "cervical";
}

namespace {

struct GroupAccumulator {
    std::size_t records = 0;
    std::size_t identified = 0, id_total = 0;
    std::vector<double> dice, hd, dist;

    void add(const VertebraRecord& r) {
        ++records;
        if (r.identified) {
            ++id_total;
            if (*r.identified) ++identified;
        }
        if (r.dice) dice.push_back(*r.dice);
        if (r.hd_mm) hd.push_back(*r.hd_mm);
        if (r.dist_mm) dist.push_back(*r.dist_mm);
    }

    [[nodiscard]] std::optional<GroupMeans> means() const {
        if (records == 0) return std::nullopt;
        auto avg = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        GroupMeans m;
        m.records = records;
        if (id_total > 0) m.id_rate = static_cast<double>(identified) / static_cast<double>(id_total);
        m.dice = avg(dice);
        m.hd_mm = avg(hd);
        m.d_mean_mm = avg(dist);
        return m;
    }
};

std::optional<double> curve_value(const ScanEvaluation& e, CurveMetric metric) {
    return metric == CurveMetric::id_rate ? e.id_rate : e.dice_mean;
}

// The shift chain is C1..T12, L1..L6, i.e. codes 1..25 in order; T13 stays put.
int shifted_code(int code, int shift) {
    if (code == 0 || code == 28) return code;
    const int moved = code + shift;
    return moved >= 1 && moved <= 25 ? moved : 0;
}

}  // namespace

std::vector<MetricGroup> group_metrics(std::span<const ScanEvaluation> evals, GroupBy by) {
    if (evals.empty()) throw Error(ErrorCode::empty_input, "cannot group an empty cohort");
    std::vector<MetricGroup> out;
    if (by == GroupBy::vertebra) {
        std::map<VertebraLabel, GroupAccumulator> acc;
        for (const auto& e : evals)
            for (const auto& [label, rec] : e.per_vertebra) acc[label].add(rec);
        for (auto label : all_labels()) {
            auto it = acc.find(label);
            out.push_back({label.name(), it == acc.end() ? std::nullopt : it->second.means()});
        }
    } else {
        std::array<GroupAccumulator, 3> acc;
        for (const auto& e : evals)
            for (const auto& [label, rec] : e.per_vertebra) acc[static_cast<std::size_t>(region_of(label))].add(rec);
        for (auto r : {Region::cervical, Region::thoracic, Region::lumbar})
            out.push_back({to_string(r), acc[static_cast<std::size_t>(r)].means()});
    }
    return out;
}

std::string to_string(FovCategory category) {
    switch (category) {
        case FovCategory::ct_plus_c1: return "CT_plus_C1";
        case FovCategory::ct_minus_c1: return "CT_minus_C1";
        case FovCategory::tl_plus_l5: return "TL_plus_L5";
        case FovCategory::tl_minus_l5: return "TL_minus_L5";
        case FovCategory::ctl_plus_c1_l5: return "CTL_plus_C1_L5";
        case FovCategory::ctl_minus_c1_or_l5: return "CTL_minus_C1_or_L5";
        case FovCategory::uncovered: return "uncovered";
    }
    return "uncovered";
}

const std::vector<FovCategory>& all_fov_categories() {
    static const std::vector<FovCategory> all = {
        FovCategory::ct_plus_c1,     FovCategory::ct_minus_c1,        FovCategory::tl_plus_l5,
        FovCategory::tl_minus_l5,    FovCategory::ctl_plus_c1_l5,     FovCategory::ctl_minus_c1_or_l5,
        FovCategory::uncovered,
    };
    return all;
}

FovCategory fov_category(const std::set<VertebraLabel>& s) {
    auto has = [&](int code) { return s.count(VertebraLabel(code)) != 0; };
    const bool cranium = has(1);
    const bool ct_junction = has(7) && has(8);
    const bool tl_junction = (has(19) || has(28)) && has(20);
    const bool last_lumbar = has(24) || has(25);

    if (ct_junction && !tl_junction) return cranium ? FovCategory::ct_plus_c1 : FovCategory::ct_minus_c1;
    if (!ct_junction && tl_junction) return last_lumbar ? FovCategory::tl_plus_l5 : FovCategory::tl_minus_l5;
    if (ct_junction && tl_junction)
        return cranium && last_lumbar ? FovCategory::ctl_plus_c1_l5 : FovCategory::ctl_minus_c1_or_l5;
    return FovCategory::uncovered;
}

std::set<VertebraLabel> gt_labels_of(const ScanEvaluation& eval) {
    std::set<VertebraLabel> out;
    for (const auto& [label, rec] : eval.per_vertebra) out.insert(label);
    return out;
}

std::string to_string(CurveMetric metric) { return metric == CurveMetric::id_rate ? "id_rate" : "dice_mean"; }

SuccessCurve success_curve(std::span<const ScanEvaluation> evals, CurveMetric metric, std::span<const double> taus) {
    if (evals.empty()) throw Error(ErrorCode::empty_input, "success curve of an empty cohort");
    if (!std::is_sorted(taus.begin(), taus.end()))
        throw Error(ErrorCode::invalid_argument, "thresholds must be sorted ascending");
    std::vector<double> values;
    for (const auto& e : evals)
        if (auto v = curve_value(e, metric)) values.push_back(*v);
    if (values.empty())
        throw Error(ErrorCode::empty_input, "no scan carries a value for " + to_string(metric));

    SuccessCurve curve;
    curve.taus.assign(taus.begin(), taus.end());
    for (double tau : taus) {
        const auto hits = std::count_if(values.begin(), values.end(), [tau](double v) { return v >= tau; });
        curve.fractions.push_back(static_cast<double>(hits) / static_cast<double>(values.size()));
    }
    return curve;
}

FailureCounts failure_table(std::span<const ScanEvaluation> evals, double threshold) {
    FailureCounts out;
    out.threshold = threshold;
    out.scans = evals.size();
    for (const auto& e : evals) {
        if (e.id_rate && *e.id_rate < threshold) ++out.id_rate;
        if (e.dice_mean && *e.dice_mean < threshold) ++out.dice;
    }
    return out;
}

TransitionalSplit transitional_split(std::span<const ScanEvaluation> evals,
                                     const std::map<std::string, std::set<VertebraLabel>>& gt_label_sets) {
    if (gt_label_sets.size() != evals.size())
        throw Error(ErrorCode::invalid_argument, "label sets do not match the evaluated scans");
    std::vector<ScanEvaluation> rare, normal;
    TransitionalSplit out;
    for (const auto& e : evals) {
        auto it = gt_label_sets.find(e.scan_id);
        if (it == gt_label_sets.end())
            throw Error(ErrorCode::invalid_argument, "no label set for scan " + e.scan_id);
        const bool transitional = it->second.count(VertebraLabel(25)) || it->second.count(VertebraLabel(28));
        (transitional ? rare : normal).push_back(e);
        (transitional ? out.rare_scans : out.normal_scans).push_back(e.scan_id);
    }
    if (!rare.empty()) out.rare = aggregate_scan_level(rare);
    if (!normal.empty()) out.normal = aggregate_scan_level(normal);
    return out;
}

LabelShift detect_label_shift(const LabelVolume& gt, const LabelVolume& pred, int min_shift, int max_shift,
                              double flag_gain) {
    require_same_grid(gt, pred);
    if (min_shift > 0 || max_shift < 0)
        throw Error(ErrorCode::invalid_argument, "shift range must contain 0");

    constexpr std::size_t n_codes = VertebraLabel::max_code + 1;
    std::vector<std::int64_t> joint(n_codes * n_codes, 0);
    const auto a = gt.voxels();
    const auto b = pred.voxels();
    for (std::size_t n = 0; n < a.size(); ++n) ++joint[a[n] * n_codes + b[n]];

    const auto gt_labels = gt.labels();
    if (gt_labels.empty()) return {};

    auto mean_dice = [&](int shift) {
        std::array<std::int64_t, n_codes> pred_count{}, overlap{};
        for (std::size_t p = 1; p < n_codes; ++p) {
            const auto target = static_cast<std::size_t>(shifted_code(static_cast<int>(p), shift));
            if (target == 0) continue;
            pred_count[target] += pred.histogram()[p];
            overlap[target] += joint[target * n_codes + p];
        }
        double sum = 0.0;
        for (auto label : gt_labels) {
            const auto c = static_cast<std::size_t>(label.code());
            sum += 2.0 * static_cast<double>(overlap[c]) / static_cast<double>(gt.histogram()[c] + pred_count[c]);
        }
        return sum / static_cast<double>(gt_labels.size());
    };

    const double base = mean_dice(0);
    LabelShift out;
    double best = base;
    // Visit shifts by increasing magnitude so ties keep the smaller shift.
    for (int mag = 1; mag <= std::max(-min_shift, max_shift); ++mag) {
        for (int s : {-mag, mag}) {
            if (s < min_shift || s > max_shift) continue;
            const double d = mean_dice(s);
            if (d > best) {
                best = d;
                out.best_shift = s;
            }
        }
    }
    out.dice_gain = best - base;
    out.flagged = out.best_shift != 0 && out.dice_gain > flag_gain;
    return out;
}

}  // namespace spinebench
