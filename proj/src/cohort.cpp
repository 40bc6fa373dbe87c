#include "spinebench/cohort.hpp"

#include "spinebench/analysis.hpp"
#include "spinebench/error.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace spinebench {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::optional<std::string> volume_stem(const fs::path& p) {
    const auto name = p.filename().string();
    for (const std::string ext : {".nii.gz", ".nii"})
        if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
            return name.substr(0, name.size() - ext.size());
    return std::nullopt;
}

ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson means_json(const std::optional<GroupMeans>& m) {
    if (!m) return nullptr;
    return {{"records", m->records},
            {"id_rate", opt_json(m->id_rate)},
            {"dice", opt_json(m->dice)},
            {"hd_mm", opt_json(m->hd_mm)},
            {"d_mean_mm", opt_json(m->d_mean_mm)}};
}

std::optional<double> metric_value(const ScanEvaluation& e, RankMetric m) {
    switch (m) {
        case RankMetric::id_rate: return e.id_rate;
        case RankMetric::d_mean: return e.d_mean_mm;
        case RankMetric::dice: return e.dice_mean;
        case RankMetric::hd: return e.hd_mean_mm;
    }
    return std::nullopt;
}

}  // namespace

CohortManifest CohortManifest::from_json(const std::string& text, const fs::path& base_dir) {
    CohortManifest m;
    std::set<std::string> seen;
    try {
        const auto doc = ojson::parse(text);
        const auto& list = doc.is_array() ? doc : doc.at("scans");
        for (const auto& e : list) {
            ManifestEntry entry;
            entry.scan_id = e.at("scan_id").get<std::string>();
            if (!seen.insert(entry.scan_id).second)
                throw Error(ErrorCode::format, "duplicate scan_id '" + entry.scan_id + "' in manifest");
            entry.gt_volume = resolve(base_dir, e.at("gt_volume").get<std::string>());
            entry.pred_volume = resolve(base_dir, e.at("pred_volume").get<std::string>());
            const bool has_gt = e.contains("gt_centroids") && !e["gt_centroids"].is_null();
            const bool has_pred = e.contains("pred_centroids") && !e["pred_centroids"].is_null();
            if (has_gt != has_pred)
                throw Error(ErrorCode::format, "scan '" + entry.scan_id + "' must list both centroid files or neither");
            if (has_gt) {
                entry.gt_centroids = resolve(base_dir, e["gt_centroids"].get<std::string>());
                entry.pred_centroids = resolve(base_dir, e["pred_centroids"].get<std::string>());
            }
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid manifest: ") + e.what());
    }
    return m;
}

CohortManifest CohortManifest::load(const fs::path& path) {
    return from_json(read_text_file(path), path.parent_path());
}

CohortManifest CohortManifest::from_directories(const fs::path& gt_dir, const fs::path& pred_dir) {
    std::map<std::string, fs::path> gt, pred;
    for (auto [dir, dst] : {std::pair{&gt_dir, &gt}, std::pair{&pred_dir, &pred}}) {
        if (!fs::is_directory(*dir)) throw Error(ErrorCode::io, "not a directory: " + dir->string());
        for (const auto& f : fs::directory_iterator(*dir))
            if (auto stem = volume_stem(f.path())) (*dst)[*stem] = f.path();
    }
    CohortManifest m;
    for (const auto& [id, gt_path] : gt) {
        auto it = pred.find(id);
        if (it == pred.end()) continue;
        ManifestEntry e{id, gt_path, it->second, std::nullopt, std::nullopt};
        const auto gt_ctd = gt_dir / (id + "_ctd.json");
        const auto pred_ctd = pred_dir / (id + "_ctd.json");
        if (fs::exists(gt_ctd) && fs::exists(pred_ctd)) {
            e.gt_centroids = gt_ctd;
            e.pred_centroids = pred_ctd;
        }
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw Error(ErrorCode::empty_input, "no scan pairs found in the two directories");
    return m;
}

std::string CohortManifest::to_json() const {
    ojson doc;
    doc["scans"] = ojson::array();
    for (const auto& e : entries) {
        ojson item = {{"scan_id", e.scan_id}, {"gt_volume", e.gt_volume.string()}, {"pred_volume", e.pred_volume.string()}};
        if (e.gt_centroids) {
            item["gt_centroids"] = e.gt_centroids->string();
            item["pred_centroids"] = e.pred_centroids->string();
        }
        doc["scans"].push_back(item);
    }
    return doc.dump(2) + "\n";
}

ScanEvaluation evaluate_entry(const ManifestEntry& entry, const EvaluateOptions& options) {
    const auto gt = load_label_volume(entry.gt_volume);
    const auto pred = load_label_volume(entry.pred_volume);
    CentroidSet gt_ctd, pred_ctd;
    if (entry.gt_centroids) {
        gt_ctd = load_centroids(*entry.gt_centroids, options.centroid_space, &gt);
        pred_ctd = load_centroids(*entry.pred_centroids, options.centroid_space, &pred);
    }
    auto ev = evaluate_scan(entry.scan_id, gt, pred, gt_ctd, pred_ctd, options.mode);
    if (options.label_shift) ev.label_shift = detect_label_shift(gt, pred);
    return ev;
}

CohortReport run_evaluate(const CohortManifest& manifest, const EvaluateOptions& options) {
    const std::size_t n = manifest.entries.size();
    std::vector<std::optional<ScanEvaluation>> results(n);
    std::vector<std::optional<std::string>> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= n) return;
            try {
                results[idx] = evaluate_entry(manifest.entries[idx], options);
            } catch (const std::exception& e) {
                errors[idx] = e.what();
                if (!options.skip_errors) abort.store(true);
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<ScanEvaluation> scans;
    std::vector<FailedScan> failed;
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (errors[idx]) {
            if (!options.skip_errors)
                throw Error(ErrorCode::io, "scan '" + manifest.entries[idx].scan_id + "' failed: " + *errors[idx]);
            failed.push_back({manifest.entries[idx].scan_id, *errors[idx]});
        } else if (results[idx]) {
            scans.push_back(std::move(*results[idx]));
        }
    }
    return make_report(options.mode, std::move(scans), std::move(failed));
}

CohortReport run_analyze(CohortReport report, const AnalyzeOptions& options) {
    const auto& evals = report.scans;
    auto& out = report.analysis;
    if (evals.empty() &&
        (options.vertebrae || options.regions || options.fov || options.curve_taus || options.transitional))
        throw Error(ErrorCode::empty_input, "report contains no evaluated scan");

    if (options.vertebrae) {
        ojson block = ojson::object();
        for (const auto& g : group_metrics(evals, GroupBy::vertebra)) block[g.name] = means_json(g.means);
        out["by_vertebra"] = block;
    }
    if (options.regions) {
        ojson block = ojson::object();
        for (const auto& g : group_metrics(evals, GroupBy::region)) block[g.name] = means_json(g.means);
        out["by_region"] = block;
    }
    if (options.fov) {
        std::map<FovCategory, std::vector<ScanEvaluation>> buckets;
        ojson per_scan = ojson::object();
        for (const auto& e : evals) {
            const auto cat = fov_category(gt_labels_of(e));
            buckets[cat].push_back(e);
            per_scan[e.scan_id] = to_string(cat);
        }
        ojson cats = ojson::object();
        for (auto cat : all_fov_categories()) {
            auto it = buckets.find(cat);
            if (it == buckets.end()) {
                cats[to_string(cat)] = nullptr;
                continue;
            }
            cats[to_string(cat)] = {{"scans", it->second.size()}, {"aggregate", to_json(aggregate_scan_level(it->second))}};
        }
        out["fov"] = {{"scans", per_scan}, {"categories", cats}};
    }
    if (options.curve_taus) {
        ojson block = ojson::object();
        for (auto metric : {CurveMetric::id_rate, CurveMetric::dice_mean}) {
            const bool any = std::any_of(evals.begin(), evals.end(), [&](const ScanEvaluation& e) {
                return (metric == CurveMetric::id_rate ? e.id_rate : e.dice_mean).has_value();
            });
            if (!any) {
                block[to_string(metric)] = nullptr;
                continue;
            }
            const auto curve = success_curve(evals, metric, *options.curve_taus);
            block[to_string(metric)] = {{"taus", curve.taus}, {"fractions", curve.fractions}};
        }
        out["curves"] = block;
    }
    if (options.failures) {
        const auto f = failure_table(evals, options.failure_threshold);
        out["failures"] = {{"threshold", f.threshold}, {"scans", f.scans}, {"id_rate", f.id_rate}, {"dice", f.dice}};
    }
    if (options.transitional) {
        std::map<std::string, std::set<VertebraLabel>> sets;
        for (const auto& e : evals) sets[e.scan_id] = gt_labels_of(e);
        const auto split = transitional_split(evals, sets);
        out["transitional"] = {{"rare_scans", split.rare_scans},
                               {"normal_scans", split.normal_scans},
                               {"rare", split.rare ? to_json(*split.rare) : ojson(nullptr)},
                               {"normal", split.normal ? to_json(*split.normal) : ojson(nullptr)}};
    }
    if (options.label_shift) {
        ojson per_scan = ojson::object();
        ojson flagged = ojson::array();
        for (const auto& e : evals) {
            if (!e.label_shift) {
                per_scan[e.scan_id] = nullptr;
                continue;
            }
            per_scan[e.scan_id] = {{"best_shift", e.label_shift->best_shift},
                                   {"dice_gain", e.label_shift->dice_gain},
                                   {"flagged", e.label_shift->flagged}};
            if (e.label_shift->flagged) flagged.push_back(e.scan_id);
        }
        out["label_shift"] = {{"gain_threshold", label_shift_flag_gain}, {"flagged", flagged}, {"scans", per_scan}};
    }
    return report;
}

RankResult run_rank(std::span<const TeamReport> reports, const WeightConfig& config) {
    config.validate();
    RankResult result;
    result.config = config;

    std::map<std::string, std::vector<const TeamReport*>> by_phase;
    for (const auto& r : reports) {
        if (std::find(result.table.teams.begin(), result.table.teams.end(), r.team) == result.table.teams.end())
            result.table.teams.push_back(r.team);
        auto& list = by_phase[r.phase];
        for (const auto* other : list)
            if (other->team == r.team)
                throw Error(ErrorCode::invalid_argument, "team '" + r.team + "' listed twice in phase '" + r.phase + "'");
        list.push_back(&r);
    }
    for (const auto& [phase, list] : by_phase)
        if (!config.phase_weights.count(phase))
            throw Error(ErrorCode::invalid_argument, "phase '" + phase + "' has no weight in the config");

    for (const auto& [phase, list] : by_phase) {
        std::vector<std::string> scan_ids;
        for (const auto& s : list.front()->report.scans) scan_ids.push_back(s.scan_id);
        std::sort(scan_ids.begin(), scan_ids.end());
        for (const auto* tr : list) {
            std::vector<std::string> ids;
            for (const auto& s : tr->report.scans) ids.push_back(s.scan_id);
            std::sort(ids.begin(), ids.end());
            if (ids != scan_ids)
                throw Error(ErrorCode::invalid_argument,
                            "scan set of team '" + tr->team + "' differs from team '" + list.front()->team +
                                "' in phase '" + phase + "'");
        }
        if (scan_ids.empty()) throw Error(ErrorCode::empty_input, "phase '" + phase + "' has no scans");
        result.phase_scans[phase] = scan_ids.size();
        result.table.phase_team_counts[phase] = list.size();

        for (const auto& [metric, weight] : config.metric_weights) {
            MetricSampleTable table;
            table.direction = direction_of(metric);
            table.scan_ids = scan_ids;
            for (const auto* tr : list) {
                table.teams.push_back(tr->team);
                std::map<std::string, double> values;
                for (const auto& s : tr->report.scans) {
                    auto v = metric_value(s, metric);
                    if (!v)
                        throw Error(ErrorCode::invalid_argument, "team '" + tr->team + "' has no " + to_string(metric) +
                                                                     " for scan '" + s.scan_id +
                                                                     "' (evaluate in a ranking mode)");
                    values[s.scan_id] = *v;
                }
                std::vector<double> row;
                for (const auto& id : scan_ids) row.push_back(values.at(id));
                table.values.push_back(std::move(row));
            }
            MetricPoints mp;
            mp.direction = table.direction;
            mp.teams = table.teams;
            mp.points = pairwise_points(table, config.alpha);
            mp.normalized = normalize_points(mp.points.raw, list.size());
            auto& entries = result.table.phases[phase][metric];
            for (std::size_t t = 0; t < mp.teams.size(); ++t)
                entries[mp.teams[t]] = {mp.points.raw[t], mp.normalized[t]};
            result.details[phase][metric] = std::move(mp);
        }
    }
    result.leaderboard = combine_scores(result.table, config);
    return result;
}

std::string leaderboard_to_json(const RankResult& r) {
    ojson doc;
    doc["schema"] = "spinebench-leaderboard/1";
    doc["config"] = ojson::parse(r.config.to_json());
    doc["phases"] = ojson::object();
    for (const auto& [phase, metrics] : r.details) {
        ojson p;
        p["teams"] = metrics.begin()->second.teams;
        p["scans"] = r.phase_scans.at(phase);
        p["metrics"] = ojson::object();
        for (const auto& [metric, mp] : metrics) {
            ojson m;
            m["direction"] = mp.direction == Direction::higher_better ? "higher_better" : "lower_better";
            m["points"] = ojson::object();
            for (std::size_t t = 0; t < mp.teams.size(); ++t)
                m["points"][mp.teams[t]] = {{"raw", mp.points.raw[t]}, {"normalized", mp.normalized[t]}};
            m["comparisons"] = ojson::array();
            for (const auto& c : mp.points.comparisons) {
                m["comparisons"].push_back(
                    {{"first", mp.teams[c.first]},
                     {"second", mp.teams[c.second]},
                     {"p_first_better", opt_json(c.p_first_better)},
                     {"p_second_better", opt_json(c.p_second_better)},
                     {"winner", c.winner ? ojson(mp.teams[*c.winner]) : ojson(nullptr)}});
            }
            p["metrics"][to_string(metric)] = m;
        }
        doc["phases"][phase] = p;
    }
    doc["leaderboard"] = ojson::array();
    for (const auto& row : r.leaderboard)
        doc["leaderboard"].push_back({{"rank", row.rank}, {"team", row.team}, {"score", row.score}});
    return doc.dump(2) + "\n";
}

std::string leaderboard_to_markdown(const RankResult& r) {
    std::ostringstream ss;
    ss << "| Rank | Team | Score |";
    std::vector<std::pair<std::string, RankMetric>> columns;
    for (const auto& [phase, metrics] : r.details)
        for (const auto& [metric, mp] : metrics) {
            columns.emplace_back(phase, metric);
            ss << ' ' << phase << ' ' << to_string(metric) << " |";
        }
    ss << "\n|---|---|---|";
    for (std::size_t n = 0; n < columns.size(); ++n) ss << "---|";
    ss << '\n';
    for (const auto& row : r.leaderboard) {
        ss << "| " << row.rank << " | " << row.team << " | " << std::fixed << std::setprecision(4) << row.score << " |";
        for (const auto& [phase, metric] : columns) {
            const auto& entries = r.table.phases.at(phase).at(metric);
            auto it = entries.find(row.team);
            if (it == entries.end())
                ss << " * |";
            else
                ss << ' ' << it->second.raw << " (" << std::setprecision(3) << it->second.normalized << ") |";
        }
        ss << '\n';
    }
    return ss.str();
}

std::vector<CentroidSet> load_centroid_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(dir))
        if (f.path().extension() == ".json") files.push_back(f.path());
    std::sort(files.begin(), files.end());
    std::vector<CentroidSet> out;
    for (const auto& f : files) out.push_back(load_centroids(f, CentroidSpace::world));
    if (out.empty()) throw Error(ErrorCode::empty_input, "no centroid files in " + dir.string());
    return out;
}

void run_synth(const std::string& spec_json, const fs::path& out_dir) {
    ojson doc;
    try {
        doc = ojson::parse(spec_json);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, std::string("invalid phantom spec: ") + e.what());
    }
    std::vector<PhantomSpec> specs;
    if (doc.is_array())
        for (const auto& item : doc) specs.push_back(PhantomSpec::from_json(item.dump()));
    else
        specs.push_back(PhantomSpec::from_json(doc.dump()));

    fs::create_directories(out_dir);
    CohortManifest manifest;
    std::set<std::string> names;
    for (const auto& spec : specs) {
        if (!names.insert(spec.name).second)
            throw Error(ErrorCode::invalid_argument, "duplicate phantom name '" + spec.name + "'");
        const auto phantom = make_phantom(spec);
        NiftiWriteOptions opts;
        opts.gzip = true;
        const auto vol_name = spec.name + ".nii.gz";
        const auto ctd_name = spec.name + "_ctd.json";
        write_nifti(phantom.volume, out_dir / vol_name, opts);
        write_text_file(out_dir / ctd_name, centroids_to_json(phantom.centroids));
        manifest.entries.push_back({spec.name, vol_name, vol_name, ctd_name, ctd_name});
    }
    write_text_file(out_dir / "manifest.json", manifest.to_json());
}

}  // namespace spinebench
