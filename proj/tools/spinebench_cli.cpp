#include "spinebench/spinebench.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { sb_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

void check(sb_status status) {
    if (status != SB_OK) throw CliError(sb_last_error());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError("cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError("cannot write " + path);
    out << text;
    if (!out) throw CliError("write failed for " + path);
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Run {
public:
    Run(int argc, char** argv) : start_(std::chrono::steady_clock::now()), started_at_(utc_now()) {
        for (int n = 1; n < argc; ++n) args_.emplace_back(argv[n]);
    }

    /// Writes the result (stdout when `out` is empty) plus a `<out>.meta.json` sidecar.
    void emit(const std::string& out, const std::string& text, nlohmann::ordered_json extra = {}) const {
        if (out.empty()) {
            std::cout << text;
            return;
        }
        write_file(out, text);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        nlohmann::ordered_json meta = {{"tool", "spinebench"},
                                       {"version", sb_version()},
                                       {"arguments", args_},
                                       {"started_at", started_at_},
                                       {"elapsed_s", seconds}};
        if (!extra.is_null())
            for (const auto& [k, v] : extra.items()) meta[k] = v;
        write_file(out + ".meta.json", meta.dump(2) + "\n");
        std::cerr << "wrote " << out << '\n';
    }

private:
    std::chrono::steady_clock::time_point start_;
    std::string started_at_;
    std::vector<std::string> args_;
};

std::vector<double> read_taus(const std::string& path) {
    try {
        const auto doc = nlohmann::json::parse(read_file(path));
        const auto& list = doc.is_object() ? doc.at("taus") : doc;
        return list.get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw CliError("invalid tau file " + path + ": " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vertebral labelling and segmentation benchmark toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sb_version()));
    Run run(argc, argv);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a cohort of prediction/ground-truth pairs");
    std::string manifest_path, gt_dir, pred_dir, mode = "analysis", space = "world", eval_out, format = "json";
    unsigned threads = 1;
    bool skip_errors = false;
    auto* manifest_opt = evaluate->add_option("--manifest", manifest_path, "Cohort manifest JSON");
    auto* gt_dir_opt = evaluate->add_option("--gt-dir", gt_dir, "Ground-truth directory (pairs files by scan stem)");
    auto* pred_dir_opt = evaluate->add_option("--pred-dir", pred_dir, "Prediction directory");
    gt_dir_opt->needs(pred_dir_opt)->excludes(manifest_opt);
    pred_dir_opt->needs(gt_dir_opt);
    evaluate->add_option("--mode", mode, "analysis | ranking19 | ranking20")
        ->check(CLI::IsMember({"analysis", "ranking19", "ranking20"}));
    evaluate->add_option("--centroid-space", space, "world | voxel")->check(CLI::IsMember({"world", "voxel"}));
    evaluate->add_option("--threads", threads, "Worker count")->check(CLI::PositiveNumber);
    evaluate->add_option("--out", eval_out, "Output file (stdout if omitted)");
    evaluate->add_option("--format", format, "json | csv | markdown")->check(CLI::IsMember({"json", "csv", "markdown"}));
    evaluate->add_flag("--skip-errors", skip_errors, "Record failing scans instead of aborting");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Add analysis blocks to an evaluation report");
    std::string report_path, taus_path, analyze_out;
    sb_analyze_options aopts;
    sb_analyze_options_init(&aopts);
    bool fov = false, regions = false, vertebrae = false, failures = false, transitional = false, shift = false;
    analyze->add_option("--report", report_path, "Report JSON from evaluate")->required();
    analyze->add_flag("--fov", fov, "Field-of-view categories");
    analyze->add_flag("--regions", regions, "Per-region means");
    analyze->add_flag("--vertebrae", vertebrae, "Per-vertebra means");
    analyze->add_option("--curves", taus_path, "JSON array of thresholds for success curves");
    analyze->add_flag("--failures", failures, "Count scans below the failure threshold");
    analyze->add_option("--failure-threshold", aopts.failure_threshold, "Failure threshold");
    analyze->add_flag("--transitional", transitional, "Split by transitional vertebrae");
    analyze->add_flag("--label-shift", shift, "One-label shift diagnostics");
    analyze->add_option("--out", analyze_out, "Output file (stdout if omitted)");

    // rank
    auto* rank = app.add_subcommand("rank", "Significance-based leaderboard");
    std::vector<std::string> teams, phases;
    std::string preset, config_path, rank_out;
    rank->add_option("--team", teams, "NAME=report.json, assigned to the latest --phase")->required();
    rank->add_option("--phase", phases, "Phase for the --team options that follow it");
    auto* preset_opt = rank->add_option("--preset", preset, "verse19 | verse20")
                           ->check(CLI::IsMember({"verse19", "verse20"}));
    auto* config_opt = rank->add_option("--config", config_path, "Weight configuration JSON");
    preset_opt->excludes(config_opt);
    rank->add_option("--out", rank_out, "Leaderboard JSON (a .md file is written next to it)");

    // labelseq
    auto* labelseq = app.add_subcommand("labelseq", "Candidate sequence selection tools");
    labelseq->require_subcommand(1);
    auto* solve = labelseq->add_subcommand("solve", "Select one candidate per vertebra");
    std::string cand_path, stats_path, solve_out;
    sb_mrf_overrides overrides;
    sb_mrf_overrides_init(&overrides);
    solve->add_option("--candidates", cand_path, "Candidate JSON")->required();
    solve->add_option("--stats", stats_path, "Displacement statistics JSON")->required();
    solve->add_option("--lambda", overrides.lambda, "Unary/pairwise balance");
    solve->add_option("--bias", overrides.bias, "Unary bias");
    solve->add_option("--threshold", overrides.threshold, "Minimum candidate heat");
    solve->add_option("--penalty", overrides.penalty, "Heat factor for borrowed candidates");
    solve->add_option("--out", solve_out, "Output file (stdout if omitted)");
    auto* stats = labelseq->add_subcommand("stats", "Displacement statistics from annotated centroids");
    std::string centroid_dir, stats_out;
    stats->add_option("--centroid-dir", centroid_dir, "Directory of centroid JSON files")->required();
    stats->add_option("--out", stats_out, "Output file (stdout if omitted)");
    auto* check_cmd = labelseq->add_subcommand("check", "Check distances and ordering of a centroid file");
    std::string check_path, check_out;
    check_cmd->add_option("--centroids", check_path, "Centroid JSON (world space)")->required();
    check_cmd->add_option("--out", check_out, "Output file (stdout if omitted)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate phantom volumes and centroids");
    std::string spec_path, out_dir;
    synth->add_option("--spec", spec_path, "Phantom spec JSON (object or array)")->required();
    synth->add_option("--out-dir", out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*evaluate) {
            std::string manifest_json, base_dir;
            if (!manifest_path.empty()) {
                manifest_json = read_file(manifest_path);
                base_dir = fs::path(manifest_path).parent_path().string();
            } else if (!gt_dir.empty()) {
                OwnedString m;
                check(sb_manifest_from_dirs(gt_dir.c_str(), pred_dir.c_str(), &m.ptr));
                manifest_json = m.str();
            } else {
                throw CliError("evaluate needs --manifest or --gt-dir/--pred-dir");
            }
            sb_evaluate_options opts;
            sb_evaluate_options_init(&opts);
            opts.mode = mode.c_str();
            opts.centroid_space = space.c_str();
            opts.threads = threads;
            opts.skip_errors = skip_errors ? 1 : 0;
            std::cerr << "evaluating with " << threads << " worker(s)\n";
            OwnedString report;
            check(sb_evaluate_manifest(manifest_json.c_str(), base_dir.c_str(), &opts, &report.ptr));
            std::string text = report.str();
            const auto failed = nlohmann::json::parse(text).at("failed_scans");
            for (const auto& f : failed)
                std::cerr << "skipped scan " << f.at("scan_id").get<std::string>() << ": "
                          << f.at("error").get<std::string>() << '\n';
            if (format != "json") {
                OwnedString rendered;
                check(sb_report_render(text.c_str(), format.c_str(), &rendered.ptr));
                text = rendered.str();
            }
            run.emit(eval_out, text, {{"threads", threads}, {"mode", mode}, {"failed_scans", failed.size()}});
        } else if (*analyze) {
            aopts.fov = fov;
            aopts.regions = regions;
            aopts.vertebrae = vertebrae;
            aopts.failures = failures;
            aopts.transitional = transitional;
            aopts.label_shift = shift;
            std::vector<double> taus;
            if (!taus_path.empty()) {
                taus = read_taus(taus_path);
                aopts.curve_taus = taus.data();
                aopts.curve_tau_count = taus.size();
            }
            const auto report = read_file(report_path);
            OwnedString out;
            check(sb_analyze(report.c_str(), &aopts, &out.ptr));
            run.emit(analyze_out, out.str());
        } else if (*rank) {
            if (preset.empty() && config_path.empty()) throw CliError("rank needs --preset or --config");
            // --team values belong to the most recent --phase before them.
            std::vector<std::string> entry_phase, entry_team, entry_report;
            std::string current = "public";
            std::size_t next_team = 0, next_phase = 0;
            for (const auto* opt : rank->parse_order()) {
                if (opt->get_name() == "--phase") {
                    current = phases.at(next_phase++);
                } else if (opt->get_name() == "--team") {
                    const auto& spec = teams.at(next_team++);
                    const auto eq = spec.find('=');
                    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
                        throw CliError("--team expects NAME=report.json, got '" + spec + "'");
                    entry_phase.push_back(current);
                    entry_team.push_back(spec.substr(0, eq));
                    entry_report.push_back(read_file(spec.substr(eq + 1)));
                }
            }
            std::vector<sb_rank_entry> entries;
            for (std::size_t n = 0; n < entry_team.size(); ++n)
                entries.push_back({entry_phase[n].c_str(), entry_team[n].c_str(), entry_report[n].c_str()});
            const std::string config = config_path.empty() ? std::string() : read_file(config_path);
            OwnedString json, md;
            check(sb_rank(entries.data(), entries.size(), preset.empty() ? nullptr : preset.c_str(),
                          config_path.empty() ? nullptr : config.c_str(), &json.ptr, &md.ptr));
            run.emit(rank_out, json.str());
            if (!rank_out.empty()) {
                const auto md_path = fs::path(rank_out).replace_extension(".md").string();
                write_file(md_path, md.str());
                std::cerr << "wrote " << md_path << '\n';
            } else {
                std::cerr << md.str();
            }
        } else if (*solve) {
            const auto cands = read_file(cand_path);
            const auto st = read_file(stats_path);
            OwnedString out;
            check(sb_labelseq_solve(cands.c_str(), st.c_str(), &overrides, &out.ptr));
            run.emit(solve_out, out.str());
        } else if (*stats) {
            OwnedString out;
            check(sb_labelseq_stats(centroid_dir.c_str(), &out.ptr));
            run.emit(stats_out, out.str());
        } else if (*check_cmd) {
            const auto ctd = read_file(check_path);
            OwnedString out;
            check(sb_labelseq_check(ctd.c_str(), &out.ptr));
            const auto n = nlohmann::json::parse(out.str()).at("violations").size();
            std::cerr << n << " violation(s)\n";
            run.emit(check_out, out.str());
        } else if (*synth) {
            const auto spec = read_file(spec_path);
            check(sb_synth(spec.c_str(), out_dir.c_str()));
            std::cerr << "wrote phantoms and manifest.json to " << out_dir << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
