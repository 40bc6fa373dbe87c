#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spinebench {

enum class Alternative { greater, less };

enum class PValueMethod { automatic, exact, normal };

/// Largest number of non-zero differences handled by exact enumeration in
/// automatic mode; beyond it the tie-corrected normal approximation is used.
inline constexpr std::size_t wilcoxon_exact_limit = 25;

struct WilcoxonResult {
    /// Sum of the (mid-)ranks of positive differences.
    double statistic = 0.0;
    /// One-sided p-value; empty when every difference is zero (no decision).
    std::optional<double> p_value;
    std::size_t n_nonzero = 0;
    bool exact = false;

    [[nodiscard]] bool decided() const noexcept { return p_value.has_value(); }
};

/// One-sided paired Wilcoxon signed-rank test on d = x - y. Zero differences
/// are dropped; tied |d| get mid-ranks. `greater` tests whether x tends to
/// exceed y.
[[nodiscard]] WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                                  Alternative alternative,
                                                  PValueMethod method = PValueMethod::automatic);

enum class RankMetric { id_rate, d_mean, dice, hd };
enum class Task { labelling, segmentation };
enum class Direction { higher_better, lower_better };

[[nodiscard]] std::string to_string(RankMetric metric);
[[nodiscard]] std::string to_string(Task task);
[[nodiscard]] RankMetric parse_rank_metric(const std::string& text);
[[nodiscard]] Task parse_task(const std::string& text);
[[nodiscard]] Task task_of(RankMetric metric);
[[nodiscard]] Direction direction_of(RankMetric metric);

/// Per-team samples of one metric over a common, aligned scan list.
struct MetricSampleTable {
    Direction direction = Direction::higher_better;
    std::vector<std::string> teams;
    std::vector<std::string> scan_ids;
    /// values[t][s]: team t on scan s.
    std::vector<std::vector<double>> values;
};

struct PairComparison {
    std::size_t first = 0;
    std::size_t second = 0;
    /// p-value for "first is better than second" and vice versa.
    std::optional<double> p_first_better;
    std::optional<double> p_second_better;
    /// Index of the team that earned the point, if any.
    std::optional<std::size_t> winner;
};

struct PairwisePoints {
    std::vector<int> raw;
    std::vector<PairComparison> comparisons;
};

inline constexpr double default_significance = 0.001;

/// For every unordered pair of teams, awards one point to the significantly
/// better team (one-sided p < alpha); no point when neither test is significant.
[[nodiscard]] PairwisePoints pairwise_points(const MetricSampleTable& table, double alpha = default_significance);

/// raw / team_count.
[[nodiscard]] std::vector<double> normalize_points(std::span<const int> raw, std::size_t team_count);

struct WeightConfig {
    double alpha = default_significance;
    std::map<RankMetric, double> metric_weights;
    std::map<std::string, double> phase_weights;
    std::map<Task, double> task_weights;

    /// id.rate and Dice weigh twice d_mean and HD, hidden twice public,
    /// segmentation twice labelling.
    [[nodiscard]] static WeightConfig verse19();
    /// Only id.rate and Dice are ranked.
    [[nodiscard]] static WeightConfig verse20();
    [[nodiscard]] static WeightConfig preset(const std::string& name);
    [[nodiscard]] static WeightConfig from_json(const std::string& text);
    [[nodiscard]] std::string to_json() const;

    /// Throws unless every weight is positive and alpha lies in (0, 1).
    void validate() const;
};

struct PointsEntry {
    int raw = 0;
    double normalized = 0.0;
};

/// Points per phase and metric. A team missing from a phase has no entry there.
struct PointsTable {
    std::vector<std::string> teams;
    std::map<std::string, std::map<RankMetric, std::map<std::string, PointsEntry>>> phases;
    std::map<std::string, std::size_t> phase_team_counts;
};

struct LeaderboardRow {
    std::string team;
    double score = 0.0;
    /// 1-based competition rank; tied scores share the rank.
    int rank = 1;
};

/// Weighted sum task x phase x metric x normalized points, descending.
/// Configured phases absent from the table add nothing.
[[nodiscard]] std::vector<LeaderboardRow> combine_scores(const PointsTable& table, const WeightConfig& config);

}  // namespace spinebench
