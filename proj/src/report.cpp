#include "spinebench/report.hpp"

#include "spinebench/error.hpp"
#include "spinebench/volume_io.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace spinebench {

using ojson = nlohmann::ordered_json;

namespace {

template <typename T>
ojson opt(const std::optional<T>& v) {
    return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ojson& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return doc[key].get<T>();
}

Summary summary_from_json(const ojson& doc) {
    Summary s;
    s.count = doc.at("count").get<std::size_t>();
    s.mean = get_opt<double>(doc, "mean");
    s.median = get_opt<double>(doc, "median");
    return s;
}

std::string fmt(const std::optional<double>& v, int precision = 4) {
    if (!v) return "";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << *v;
    return ss.str();
}

std::string label_list(const std::vector<VertebraLabel>& labels, char sep) {
    std::string out;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        if (n) out += sep;
        out += labels[n].name();
    }
    return out;
}

}  // namespace

CohortReport make_report(EvalMode mode, std::vector<ScanEvaluation> scans, std::vector<FailedScan> failed) {
    CohortReport r;
    r.mode = mode;
    std::sort(scans.begin(), scans.end(),
              [](const ScanEvaluation& a, const ScanEvaluation& b) { return a.scan_id < b.scan_id; });
    std::sort(failed.begin(), failed.end(),
              [](const FailedScan& a, const FailedScan& b) { return a.scan_id < b.scan_id; });
    r.scans = std::move(scans);
    r.failed = std::move(failed);
    if (!r.scans.empty()) {
        r.aggregate_scan = aggregate_scan_level(r.scans);
        r.aggregate_dataset = aggregate_dataset_level(r.scans);
    }
    return r;
}

ReportFormat parse_report_format(const std::string& text) {
    if (text == "json") return ReportFormat::json;
    if (text == "csv") return ReportFormat::csv;
    if (text == "markdown" || text == "md") return ReportFormat::markdown;
    throw Error(ErrorCode::invalid_argument, "unknown report format '" + text + "'");
}

ojson to_json(const ScanEvaluation& e) {
    ojson doc;
    doc["scan_id"] = e.scan_id;
    doc["n_gt"] = e.n_gt;
    doc["n_identified"] = e.n_identified;
    doc["id_rate"] = opt(e.id_rate);
    doc["d_mean_mm"] = opt(e.d_mean_mm);
    doc["dice_mean"] = opt(e.dice_mean);
    doc["hd_mean_mm"] = opt(e.hd_mean_mm);
    doc["extra_pred_labels"] = ojson::array();
    for (auto l : e.extra_pred_labels) doc["extra_pred_labels"].push_back(l.code());
    if (e.label_shift)
        doc["label_shift"] = {{"best_shift", e.label_shift->best_shift},
                              {"dice_gain", e.label_shift->dice_gain},
                              {"flagged", e.label_shift->flagged}};
    else
        doc["label_shift"] = nullptr;
    doc["per_vertebra"] = ojson::array();
    for (const auto& [label, rec] : e.per_vertebra) {
        doc["per_vertebra"].push_back({{"label", label.code()},
                                       {"name", label.name()},
                                       {"dice", opt(rec.dice)},
                                       {"hd_mm", opt(rec.hd_mm)},
                                       {"identified", opt(rec.identified)},
                                       {"dist_mm", opt(rec.dist_mm)}});
    }
    return doc;
}

ScanEvaluation scan_from_json(const ojson& doc) {
    ScanEvaluation e;
    e.scan_id = doc.at("scan_id").get<std::string>();
    e.n_gt = doc.at("n_gt").get<int>();
    e.n_identified = doc.value("n_identified", 0);
    e.id_rate = get_opt<double>(doc, "id_rate");
    e.d_mean_mm = get_opt<double>(doc, "d_mean_mm");
    e.dice_mean = get_opt<double>(doc, "dice_mean");
    e.hd_mean_mm = get_opt<double>(doc, "hd_mean_mm");
    for (int code : doc.at("extra_pred_labels")) e.extra_pred_labels.emplace_back(code);
    if (doc.contains("label_shift") && !doc["label_shift"].is_null()) {
        const auto& s = doc["label_shift"];
        e.label_shift = LabelShift{s.at("best_shift").get<int>(), s.at("dice_gain").get<double>(),
                                   s.at("flagged").get<bool>()};
    }
    for (const auto& v : doc.at("per_vertebra")) {
        VertebraRecord rec;
        rec.dice = get_opt<double>(v, "dice");
        rec.hd_mm = get_opt<double>(v, "hd_mm");
        rec.identified = get_opt<bool>(v, "identified");
        rec.dist_mm = get_opt<double>(v, "dist_mm");
        if (!e.per_vertebra.emplace(VertebraLabel(v.at("label").get<int>()), rec).second)
            throw Error(ErrorCode::format, "duplicate vertebra record in scan " + e.scan_id);
    }
    return e;
}

ojson to_json(const Summary& s) { return {{"count", s.count}, {"mean", opt(s.mean)}, {"median", opt(s.median)}}; }

ojson to_json(const ScanLevelAggregate& a) {
    return {{"id_rate", to_json(a.id_rate)},
            {"d_mean_mm", to_json(a.d_mean_mm)},
            {"dice_mean", to_json(a.dice_mean)},
            {"hd_mean_mm", to_json(a.hd_mean_mm)}};
}

ojson to_json(const DatasetLevelAggregate& a) {
    return {{"id_rate", opt(a.id_rate)}, {"d_mean_mm", opt(a.d_mean_mm)}};
}

std::string report_to_json(const CohortReport& r) {
    ojson doc;
    doc["schema"] = report_schema;
    doc["mode"] = to_string(r.mode);
    doc["scans"] = ojson::array();
    for (const auto& s : r.scans) doc["scans"].push_back(to_json(s));
    doc["failed_scans"] = ojson::array();
    for (const auto& f : r.failed) doc["failed_scans"].push_back({{"scan_id", f.scan_id}, {"error", f.error}});
    doc["aggregate_scan"] = r.aggregate_scan ? to_json(*r.aggregate_scan) : ojson(nullptr);
    doc["aggregate_dataset"] = r.aggregate_dataset ? to_json(*r.aggregate_dataset) : ojson(nullptr);
    for (const auto& [key, block] : r.analysis.items()) doc[key] = block;
    return doc.dump(2) + "\n";
}

CohortReport report_from_json(const std::string& text) {
    static const std::vector<std::string> core_keys = {"schema", "mode", "scans", "failed_scans",
                                                      "aggregate_scan", "aggregate_dataset"};
    CohortReport r;
    try {
        const auto doc = ojson::parse(text);
        if (doc.value("schema", std::string{}) != report_schema)
            throw Error(ErrorCode::format, std::string("report schema is not ") + report_schema);
        r.mode = parse_eval_mode(doc.at("mode").get<std::string>());
        for (const auto& s : doc.at("scans")) {
            r.scans.push_back(scan_from_json(s));
            r.scans.back().mode = r.mode;
        }
        if (doc.contains("failed_scans"))
            for (const auto& f : doc["failed_scans"])
                r.failed.push_back({f.at("scan_id").get<std::string>(), f.at("error").get<std::string>()});
        if (doc.contains("aggregate_scan") && !doc["aggregate_scan"].is_null()) {
            const auto& a = doc["aggregate_scan"];
            r.aggregate_scan = ScanLevelAggregate{summary_from_json(a.at("id_rate")), summary_from_json(a.at("d_mean_mm")),
                                                  summary_from_json(a.at("dice_mean")),
                                                  summary_from_json(a.at("hd_mean_mm"))};
        }
        if (doc.contains("aggregate_dataset") && !doc["aggregate_dataset"].is_null()) {
            const auto& a = doc["aggregate_dataset"];
            r.aggregate_dataset = DatasetLevelAggregate{get_opt<double>(a, "id_rate"), get_opt<double>(a, "d_mean_mm")};
        }
        for (const auto& [key, block] : doc.items())
            if (std::find(core_keys.begin(), core_keys.end(), key) == core_keys.end()) r.analysis[key] = block;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("malformed report: ") + e.what());
    }
    return r;
}

std::string report_to_csv(const CohortReport& r) {
    std::ostringstream ss;
    ss << "scan_id,n_gt,id_rate,d_mean_mm,dice_mean,hd_mean_mm,extra_pred_labels\n";
    for (const auto& s : r.scans) {
        ss << s.scan_id << ',' << s.n_gt << ',' << fmt(s.id_rate, 6) << ',' << fmt(s.d_mean_mm, 6) << ','
           << fmt(s.dice_mean, 6) << ',' << fmt(s.hd_mean_mm, 6) << ',' << label_list(s.extra_pred_labels, ';')
           << '\n';
    }
    return ss.str();
}

std::string report_to_markdown(const CohortReport& r) {
    std::ostringstream ss;
    ss << "| scan | N | id.rate | d_mean (mm) | Dice | HD (mm) |\n";
    ss << "|---|---|---|---|---|---|\n";
    for (const auto& s : r.scans)
        ss << "| " << s.scan_id << " | " << s.n_gt << " | " << fmt(s.id_rate) << " | " << fmt(s.d_mean_mm, 2)
           << " | " << fmt(s.dice_mean) << " | " << fmt(s.hd_mean_mm, 2) << " |\n";
    if (r.aggregate_scan) {
        const auto& a = *r.aggregate_scan;
        auto cell = [](const Summary& s, int p) {
            return s.mean ? fmt(s.mean, p) + " (" + fmt(s.median, p) + ")" : std::string{};
        };
        ss << "| **mean (median)** | | " << cell(a.id_rate, 4) << " | " << cell(a.d_mean_mm, 2) << " | "
           << cell(a.dice_mean, 4) << " | " << cell(a.hd_mean_mm, 2) << " |\n";
    }
    return ss.str();
}

std::string render_report(const CohortReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::json: return report_to_json(report);
        case ReportFormat::csv: return report_to_csv(report);
        case ReportFormat::markdown: return report_to_markdown(report);
    }
    return report_to_json(report);
}

void write_report(const CohortReport& report, const std::filesystem::path& path, ReportFormat format) {
    write_text_file(path, render_report(report, format));
}

}  // namespace spinebench
