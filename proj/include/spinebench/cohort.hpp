#pragma once

#include "spinebench/analysis.hpp"
#include "spinebench/labelseq.hpp"
#include "spinebench/metrics.hpp"
#include "spinebench/ranking.hpp"
#include "spinebench/report.hpp"
#include "spinebench/synth.hpp"
#include "spinebench/volume_io.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinebench {

struct ManifestEntry {
    std::string scan_id;
    std::filesystem::path gt_volume;
    std::filesystem::path pred_volume;
    /// Both centroid paths are given or neither; without them only
    /// segmentation metrics are computed.
    std::optional<std::filesystem::path> gt_centroids;
    std::optional<std::filesystem::path> pred_centroids;
};

struct CohortManifest {
    std::vector<ManifestEntry> entries;

    /// {"scans": [{"scan_id", "gt_volume", "pred_volume", "gt_centroids", "pred_centroids"}]}
    /// (a bare array is accepted too). Relative paths resolve against `base_dir`.
    [[nodiscard]] static CohortManifest from_json(const std::string& text, const std::filesystem::path& base_dir = {});
    [[nodiscard]] static CohortManifest load(const std::filesystem::path& path);

    /// Pairs `<id>.nii[.gz]` (+ optional `<id>_ctd.json`) files present in both directories.
    [[nodiscard]] static CohortManifest from_directories(const std::filesystem::path& gt_dir,
                                                         const std::filesystem::path& pred_dir);

    [[nodiscard]] std::string to_json() const;
};

struct EvaluateOptions {
    EvalMode mode = EvalMode::analysis;
    CentroidSpace centroid_space = CentroidSpace::world;
    unsigned threads = 1;
    bool skip_errors = false;
    bool label_shift = true;
};

[[nodiscard]] ScanEvaluation evaluate_entry(const ManifestEntry& entry, const EvaluateOptions& options);

/// Evaluates every scan on up to `threads` workers. Output does not depend on
/// the worker count. A failing scan aborts the run (naming the scan) unless
/// `skip_errors`, in which case it is listed under failed scans.
[[nodiscard]] CohortReport run_evaluate(const CohortManifest& manifest, const EvaluateOptions& options);

struct AnalyzeOptions {
    bool fov = false;
    bool regions = false;
    bool vertebrae = false;
    bool failures = false;
    bool transitional = false;
    bool label_shift = false;
    std::optional<std::vector<double>> curve_taus;
    double failure_threshold = 0.05;
};

/// Adds the requested analysis blocks to the report.
[[nodiscard]] CohortReport run_analyze(CohortReport report, const AnalyzeOptions& options);

struct TeamReport {
    std::string phase;
    std::string team;
    CohortReport report;
};

struct MetricPoints {
    Direction direction = Direction::higher_better;
    std::vector<std::string> teams;
    PairwisePoints points;
    std::vector<double> normalized;
};

struct RankResult {
    WeightConfig config;
    std::map<std::string, std::map<RankMetric, MetricPoints>> details;
    std::map<std::string, std::size_t> phase_scans;
    PointsTable table;
    std::vector<LeaderboardRow> leaderboard;
};

/// Pairwise significance points per phase and configured metric, normalised
/// by the number of teams in the phase, then combined with the weight tree.
[[nodiscard]] RankResult run_rank(std::span<const TeamReport> reports, const WeightConfig& config);
[[nodiscard]] std::string leaderboard_to_json(const RankResult& result);
[[nodiscard]] std::string leaderboard_to_markdown(const RankResult& result);

/// Loads every `*.json` centroid file of a directory (world space), sorted by name.
[[nodiscard]] std::vector<CentroidSet> load_centroid_directory(const std::filesystem::path& dir);

/// Writes `<name>.nii.gz`, `<name>_ctd.json` per phantom plus a
/// self-paired `manifest.json`. Accepts one spec object or an array.
void run_synth(const std::string& spec_json, const std::filesystem::path& out_dir);

}  // namespace spinebench
