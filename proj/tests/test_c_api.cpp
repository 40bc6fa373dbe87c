#include "doctest.h"

#include "spinebench/spinebench.h"

#include "temp_dir.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

using json = nlohmann::json;
using testing::TempDir;

namespace {

// Owns a string returned by the library.
struct Owned {
    char* p = nullptr;
    ~Owned() { sb_string_free(p); }
    [[nodiscard]] std::string str() const { return p ? p : ""; }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSpec = R"([{"name": "a", "labels": [18, 19, 20, 21]}, {"name": "b", "labels": [1, 2, 3]}])";

}  // namespace

TEST_CASE("version and error state") {
    CHECK(std::string(sb_version()) == "1.0.0");
    sb_volume* v = nullptr;
    CHECK(sb_volume_load("/definitely/missing.nii", &v) == SB_ERR_IO);
    CHECK(v == nullptr);
    CHECK(std::string(sb_last_error()).find("/definitely/missing.nii") != std::string::npos);
    CHECK(sb_volume_load(nullptr, &v) == SB_ERR_INVALID_ARGUMENT);
    sb_string_free(nullptr);
    sb_volume_free(nullptr);
    sb_centroids_free(nullptr);
}

TEST_CASE("volume and centroid handles") {
    TempDir dir;
    REQUIRE(sb_synth(kSpec, dir.path().c_str()) == SB_OK);
    sb_volume* v = nullptr;
    REQUIRE(sb_volume_load((dir / "a.nii.gz").c_str(), &v) == SB_OK);
    int64_t dims[3];
    double spacing[3];
    CHECK(sb_volume_dims(v, dims) == SB_OK);
    CHECK(dims[0] == 14);
    CHECK(dims[2] == 4 * 10 + 3 * 5 + 4);
    CHECK(sb_volume_spacing(v, spacing) == SB_OK);
    CHECK(spacing[1] == 1.0);
    size_t count = 0;
    CHECK(sb_volume_label_count(v, 19, &count) == SB_OK);
    CHECK(count == 1000);
    CHECK(sb_volume_label_count(v, 26, &count) == SB_ERR_INVALID_LABEL);

    sb_centroids* c = nullptr;
    REQUIRE(sb_centroids_load((dir / "a_ctd.json").c_str(), 0, nullptr, &c) == SB_OK);
    CHECK(sb_centroids_count(c, &count) == SB_OK);
    CHECK(count == 4);

    sb_centroids* vox = nullptr;
    CHECK(sb_centroids_parse(R"([{"label": 20, "X": 1, "Y": 2, "Z": 3}])", 1, nullptr, &vox) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_centroids_parse(R"([{"label": 20, "X": 1, "Y": 2, "Z": 3}])", 1, v, &vox) == SB_OK);
    CHECK(sb_centroids_parse("not json", 0, nullptr, &vox) == SB_ERR_FORMAT);

    Owned out;
    REQUIRE(sb_evaluate_scan("a", v, v, c, c, "ranking19", &out.p) == SB_OK);
    const auto doc = json::parse(out.str());
    CHECK(doc["scan_id"] == "a");
    CHECK(doc["dice_mean"] == 1.0);
    CHECK(doc["id_rate"] == 1.0);
    CHECK(sb_evaluate_scan("a", v, v, c, nullptr, "analysis", &out.p) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_evaluate_scan("a", v, v, nullptr, nullptr, "fast", &out.p) == SB_ERR_INVALID_ARGUMENT);

    sb_centroids_free(vox);
    sb_centroids_free(c);
    sb_volume_free(v);
}

TEST_CASE("manifest evaluation, analysis and rendering") {
    TempDir dir;
    REQUIRE(sb_synth(kSpec, dir.path().c_str()) == SB_OK);
    const auto manifest = slurp(dir / "manifest.json");

    sb_evaluate_options o;
    sb_evaluate_options_init(&o);
    CHECK(o.threads == 1);
    CHECK(o.label_shift != 0);
    o.mode = "ranking19";
    Owned one, many;
    REQUIRE(sb_evaluate_manifest(manifest.c_str(), dir.path().c_str(), &o, &one.p) == SB_OK);
    o.threads = 4;
    REQUIRE(sb_evaluate_manifest(manifest.c_str(), dir.path().c_str(), &o, &many.p) == SB_OK);
    CHECK(one.str() == many.str());
    const auto report = json::parse(one.str());
    CHECK(report["mode"] == "ranking19");
    CHECK(report["scans"].size() == 2);

    sb_analyze_options a;
    sb_analyze_options_init(&a);
    CHECK(a.failure_threshold == 0.05);
    const double taus[] = {0.25, 0.75};
    a.fov = a.failures = 1;
    a.curve_taus = taus;
    a.curve_tau_count = 2;
    Owned analyzed;
    REQUIRE(sb_analyze(one.p, &a, &analyzed.p) == SB_OK);
    const auto adoc = json::parse(analyzed.str());
    CHECK(adoc.contains("fov"));
    CHECK(adoc.contains("curves"));
    CHECK_FALSE(adoc.contains("by_region"));

    Owned csv, md;
    CHECK(sb_report_render(one.p, "csv", &csv.p) == SB_OK);
    CHECK(csv.str().rfind("scan_id,", 0) == 0);
    CHECK(sb_report_render(one.p, "markdown", &md.p) == SB_OK);
    CHECK(sb_report_render(one.p, "pdf", &md.p) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_report_render("{}", "csv", &md.p) == SB_ERR_FORMAT);

    Owned paired;
    CHECK(sb_manifest_from_dirs(dir.path().c_str(), dir.path().c_str(), &paired.p) == SB_OK);
    CHECK(json::parse(paired.str())["scans"].size() == 2);

    // a broken manifest entry names the scan
    Owned broken;
    const std::string bad = R"({"scans": [{"scan_id": "ghost", "gt_volume": "nope.nii", "pred_volume": "nope.nii"}]})";
    CHECK(sb_evaluate_manifest(bad.c_str(), dir.path().c_str(), &o, &broken.p) == SB_ERR_IO);
    CHECK(std::string(sb_last_error()).find("ghost") != std::string::npos);
    o.skip_errors = 1;
    CHECK(sb_evaluate_manifest(bad.c_str(), dir.path().c_str(), &o, &broken.p) == SB_OK);
    CHECK(json::parse(broken.str())["failed_scans"].size() == 1);
}

TEST_CASE("ranking through the C API") {
    TempDir dir;
    REQUIRE(sb_synth(kSpec, dir.path().c_str()) == SB_OK);
    const auto manifest = slurp(dir / "manifest.json");
    sb_evaluate_options o;
    sb_evaluate_options_init(&o);
    o.mode = "ranking19";
    Owned report;
    REQUIRE(sb_evaluate_manifest(manifest.c_str(), dir.path().c_str(), &o, &report.p) == SB_OK);

    const sb_rank_entry entries[] = {{"public", "x", report.p}, {"public", "y", report.p}};
    Owned lb, md;
    REQUIRE(sb_rank(entries, 2, "verse19", nullptr, &lb.p, &md.p) == SB_OK);
    const auto doc = json::parse(lb.str());
    CHECK(doc["leaderboard"].size() == 2);
    CHECK(doc["leaderboard"][0]["rank"] == 1);
    CHECK(doc["leaderboard"][1]["rank"] == 1);
    CHECK(md.str().find("| Rank |") != std::string::npos);

    Owned preset, from_config;
    REQUIRE(sb_weight_preset("verse19", &preset.p) == SB_OK);
    REQUIRE(sb_rank(entries, 2, nullptr, preset.p, &from_config.p, nullptr) == SB_OK);
    CHECK(from_config.str() == lb.str());

    CHECK(sb_rank(entries, 2, "verse19", preset.p, &lb.p, nullptr) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_rank(entries, 2, nullptr, nullptr, &lb.p, nullptr) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_weight_preset("nope", &preset.p) == SB_ERR_INVALID_ARGUMENT);
}

TEST_CASE("Wilcoxon through the C API") {
    const double x[] = {1, 2, 3, 4, 5, 6}, y[] = {0, 0, 0, 0, 0, 0};
    double w = 0, p = 0;
    CHECK(sb_wilcoxon(x, y, 6, SB_GREATER, SB_PVALUE_AUTO, &w, &p) == SB_OK);
    CHECK(w == 21.0);
    CHECK(p == 0.015625);
    CHECK(sb_wilcoxon(x, y, 6, SB_LESS, SB_PVALUE_EXACT, &w, &p) == SB_OK);
    CHECK(p == 1.0);
    CHECK(sb_wilcoxon(x, y, 6, SB_GREATER, SB_PVALUE_NORMAL, &w, &p) == SB_OK);
    CHECK(p == doctest::Approx(0.5 * std::erfc((21.0 - 10.5 - 0.5) / std::sqrt(6 * 7 * 13 / 24.0) / std::sqrt(2.0))));
    CHECK(sb_wilcoxon(x, x, 6, SB_GREATER, SB_PVALUE_AUTO, &w, &p) == SB_ERR_NO_DECISION);
    CHECK(w == 0.0);
    CHECK(sb_wilcoxon(x, y, 0, SB_GREATER, SB_PVALUE_AUTO, &w, &p) == SB_ERR_EMPTY_INPUT);
}

TEST_CASE("label sequence through the C API") {
    TempDir dir;
    REQUIRE(sb_synth(kSpec, dir.path().c_str()) == SB_OK);
    TempDir ctd;
    std::filesystem::copy(dir / "a_ctd.json", ctd / "a.json");
    Owned stats;
    REQUIRE(sb_labelseq_stats(ctd.path().c_str(), &stats.p) == SB_OK);
    CHECK(json::parse(stats.str())["mean_vec"].contains("19->20"));

    const std::string candidates = R"({"candidates": {
        "18": [{"pos": [0, 0, 30], "heat": 0.9}],
        "19": [{"pos": [0, 0, 15], "heat": 0.9}, {"pos": [3, 0, 20], "heat": 0.3}],
        "20": [{"pos": [0, 0, 0], "heat": 0.9}],
        "21": [{"pos": [0, 0, -15], "heat": 0.02}]}})";
    sb_mrf_overrides ov;
    sb_mrf_overrides_init(&ov);
    CHECK(std::isnan(ov.lambda));
    Owned solved;
    REQUIRE(sb_labelseq_solve(candidates.c_str(), stats.p, &ov, &solved.p) == SB_OK);
    const auto seq = json::parse(solved.str())["sequence"];
    REQUIRE(seq.size() >= 3);
    CHECK(seq[0]["label"] == 18);
    CHECK(seq[1]["pos"][0] == 0.0);

    ov.lambda = 2.0;
    CHECK(sb_labelseq_solve(candidates.c_str(), stats.p, &ov, &solved.p) == SB_ERR_INVALID_ARGUMENT);

    Owned check;
    REQUIRE(sb_labelseq_check(slurp(dir / "a_ctd.json").c_str(), &check.p) == SB_OK);
    CHECK(json::parse(check.str())["ok"] == true);
    CHECK(sb_labelseq_check(R"([{"label": 20, "X": 0, "Y": 0, "Z": 0}, {"label": 21, "X": 0, "Y": 0, "Z": 5}])", &check.p) ==
          SB_OK);
    CHECK(json::parse(check.str())["violations"].size() == 2);
}

TEST_CASE("null out-pointers are rejected") {
    CHECK(sb_weight_preset("verse19", nullptr) == SB_ERR_INVALID_ARGUMENT);
    CHECK(sb_synth(nullptr, "/tmp") == SB_ERR_INVALID_ARGUMENT);
}
