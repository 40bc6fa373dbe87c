#pragma once

#include "spinebench/metrics.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spinebench {

inline constexpr const char* report_schema = "spinebench/1";

struct FailedScan {
    std::string scan_id;
    std::string error;

    friend bool operator==(const FailedScan&, const FailedScan&) = default;
};

struct CohortReport {
    EvalMode mode = EvalMode::analysis;
    /// Sorted by scan_id.
    std::vector<ScanEvaluation> scans;
    std::vector<FailedScan> failed;
    std::optional<ScanLevelAggregate> aggregate_scan;
    std::optional<DatasetLevelAggregate> aggregate_dataset;
    /// Optional analysis blocks (by_vertebra, by_region, fov, curves, ...).
    nlohmann::ordered_json analysis = nlohmann::ordered_json::object();

    friend bool operator==(const CohortReport&, const CohortReport&) = default;
};

/// Sorts scans by id and fills both aggregate levels (left empty for an empty cohort).
[[nodiscard]] CohortReport make_report(EvalMode mode, std::vector<ScanEvaluation> scans,
                                       std::vector<FailedScan> failed = {});

enum class ReportFormat { json, csv, markdown };
[[nodiscard]] ReportFormat parse_report_format(const std::string& text);

[[nodiscard]] nlohmann::ordered_json to_json(const ScanEvaluation& eval);
[[nodiscard]] ScanEvaluation scan_from_json(const nlohmann::ordered_json& doc);
[[nodiscard]] nlohmann::ordered_json to_json(const Summary& s);
[[nodiscard]] nlohmann::ordered_json to_json(const ScanLevelAggregate& a);
[[nodiscard]] nlohmann::ordered_json to_json(const DatasetLevelAggregate& a);

[[nodiscard]] std::string report_to_json(const CohortReport& report);
[[nodiscard]] CohortReport report_from_json(const std::string& text);
[[nodiscard]] std::string report_to_csv(const CohortReport& report);
[[nodiscard]] std::string report_to_markdown(const CohortReport& report);
[[nodiscard]] std::string render_report(const CohortReport& report, ReportFormat format);

void write_report(const CohortReport& report, const std::filesystem::path& path, ReportFormat format);

}  // namespace spinebench
