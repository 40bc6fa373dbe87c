#include "spinebench/spinebench.h"

#include "spinebench/cohort.hpp"
#include "spinebench/error.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

struct sb_volume {
    spinebench::LabelVolume volume;
};

struct sb_centroids {
    spinebench::CentroidSet set;
};

namespace {

thread_local std::string last_error;

sb_status fail(sb_status status, const char* message) {
    last_error = message;
    return status;
}

template <typename F>
sb_status guarded(F&& body) {
    try {
        last_error.clear();
        body();
        return SB_OK;
    } catch (const spinebench::Error& e) {
        return fail(static_cast<sb_status>(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(SB_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(SB_ERR_INTERNAL, e.what());
    }
}

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw spinebench::Error(spinebench::ErrorCode::invalid_argument, what);
}

spinebench::CentroidSpace space_of(int voxel_space) {
    return voxel_space ? spinebench::CentroidSpace::voxel : spinebench::CentroidSpace::world;
}

}  // namespace

extern "C" {

const char* sb_last_error(void) { return last_error.c_str(); }

const char* sb_version(void) { return "1.0.0"; }

void sb_string_free(char* text) { std::free(text); }

sb_status sb_volume_load(const char* path, sb_volume** out) {
    return guarded([&] {
        require(path && out, "path and out must not be null");
        *out = new sb_volume{spinebench::load_label_volume(path)};
    });
}

void sb_volume_free(sb_volume* volume) { delete volume; }

sb_status sb_volume_dims(const sb_volume* volume, int64_t dims[3]) {
    return guarded([&] {
        require(volume && dims, "volume and dims must not be null");
        for (int d = 0; d < 3; ++d) dims[d] = volume->volume.dims()[d];
    });
}

sb_status sb_volume_spacing(const sb_volume* volume, double spacing[3]) {
    return guarded([&] {
        require(volume && spacing, "volume and spacing must not be null");
        for (int d = 0; d < 3; ++d) spacing[d] = volume->volume.spacing()[d];
    });
}

sb_status sb_volume_label_count(const sb_volume* volume, int code, size_t* out) {
    return guarded([&] {
        require(volume && out, "volume and out must not be null");
        *out = static_cast<size_t>(volume->volume.histogram()[static_cast<std::size_t>(spinebench::VertebraLabel(code).code())]);
    });
}

sb_status sb_centroids_load(const char* path, int voxel_space, const sb_volume* reference, sb_centroids** out) {
    return guarded([&] {
        require(path && out, "path and out must not be null");
        *out = new sb_centroids{
            spinebench::load_centroids(path, space_of(voxel_space), reference ? &reference->volume : nullptr)};
    });
}

sb_status sb_centroids_parse(const char* json, int voxel_space, const sb_volume* reference, sb_centroids** out) {
    return guarded([&] {
        require(json && out, "json and out must not be null");
        *out = new sb_centroids{
            spinebench::parse_centroids(json, space_of(voxel_space), reference ? &reference->volume : nullptr)};
    });
}

void sb_centroids_free(sb_centroids* centroids) { delete centroids; }

sb_status sb_centroids_count(const sb_centroids* centroids, size_t* out) {
    return guarded([&] {
        require(centroids && out, "centroids and out must not be null");
        *out = centroids->set.size();
    });
}

sb_status sb_evaluate_scan(const char* scan_id, const sb_volume* gt, const sb_volume* pred,
                           const sb_centroids* gt_centroids, const sb_centroids* pred_centroids, const char* mode,
                           char** out_json) {
    return guarded([&] {
        require(scan_id && gt && pred && out_json, "scan_id, volumes and out_json must not be null");
        require((gt_centroids == nullptr) == (pred_centroids == nullptr),
                "give both centroid sets or neither");
        const auto eval_mode = spinebench::parse_eval_mode(mode ? mode : "analysis");
        const spinebench::CentroidSet empty;
        auto ev = spinebench::evaluate_scan(scan_id, gt->volume, pred->volume,
                                            gt_centroids ? gt_centroids->set : empty,
                                            pred_centroids ? pred_centroids->set : empty, eval_mode);
        ev.label_shift = spinebench::detect_label_shift(gt->volume, pred->volume);
        *out_json = dup_string(spinebench::to_json(ev).dump(2) + "\n");
    });
}

void sb_evaluate_options_init(sb_evaluate_options* options) {
    if (!options) return;
    options->mode = "analysis";
    options->centroid_space = "world";
    options->threads = 1;
    options->skip_errors = 0;
    options->label_shift = 1;
}

sb_status sb_evaluate_manifest(const char* manifest_json, const char* base_dir, const sb_evaluate_options* options,
                               char** out_report_json) {
    return guarded([&] {
        require(manifest_json && out_report_json, "manifest and out must not be null");
        sb_evaluate_options defaults;
        sb_evaluate_options_init(&defaults);
        const auto& o = options ? *options : defaults;
        spinebench::EvaluateOptions opts;
        opts.mode = spinebench::parse_eval_mode(o.mode ? o.mode : "analysis");
        const std::string space = o.centroid_space ? o.centroid_space : "world";
        if (space == "world")
            opts.centroid_space = spinebench::CentroidSpace::world;
        else if (space == "voxel")
            opts.centroid_space = spinebench::CentroidSpace::voxel;
        else
            throw spinebench::Error(spinebench::ErrorCode::invalid_argument, "unknown centroid space '" + space + "'");
        opts.threads = o.threads == 0 ? 1 : o.threads;
        opts.skip_errors = o.skip_errors != 0;
        opts.label_shift = o.label_shift != 0;
        const auto manifest = spinebench::CohortManifest::from_json(manifest_json, base_dir ? base_dir : "");
        *out_report_json = dup_string(spinebench::report_to_json(spinebench::run_evaluate(manifest, opts)));
    });
}

sb_status sb_manifest_from_dirs(const char* gt_dir, const char* pred_dir, char** out_manifest_json) {
    return guarded([&] {
        require(gt_dir && pred_dir && out_manifest_json, "directories and out must not be null");
        *out_manifest_json = dup_string(spinebench::CohortManifest::from_directories(gt_dir, pred_dir).to_json());
    });
}

sb_status sb_report_render(const char* report_json, const char* format, char** out_text) {
    return guarded([&] {
        require(report_json && format && out_text, "report, format and out must not be null");
        const auto report = spinebench::report_from_json(report_json);
        *out_text = dup_string(spinebench::render_report(report, spinebench::parse_report_format(format)));
    });
}

void sb_analyze_options_init(sb_analyze_options* options) {
    if (!options) return;
    *options = sb_analyze_options{};
    options->failure_threshold = 0.05;
}

sb_status sb_analyze(const char* report_json, const sb_analyze_options* options, char** out_json) {
    return guarded([&] {
        require(report_json && options && out_json, "report, options and out must not be null");
        spinebench::AnalyzeOptions opts;
        opts.fov = options->fov != 0;
        opts.regions = options->regions != 0;
        opts.vertebrae = options->vertebrae != 0;
        opts.failures = options->failures != 0;
        opts.transitional = options->transitional != 0;
        opts.label_shift = options->label_shift != 0;
        opts.failure_threshold = options->failure_threshold;
        if (options->curve_taus)
            opts.curve_taus.emplace(options->curve_taus, options->curve_taus + options->curve_tau_count);
        auto report = spinebench::run_analyze(spinebench::report_from_json(report_json), opts);
        *out_json = dup_string(spinebench::report_to_json(report));
    });
}

sb_status sb_rank(const sb_rank_entry* entries, size_t count, const char* preset, const char* config_json,
                  char** out_json, char** out_markdown) {
    return guarded([&] {
        require(entries && count > 0 && out_json, "entries and out_json must not be null");
        require((preset == nullptr) != (config_json == nullptr), "give exactly one of preset and config");
        const auto config =
            preset ? spinebench::WeightConfig::preset(preset) : spinebench::WeightConfig::from_json(config_json);
        std::vector<spinebench::TeamReport> reports;
        for (size_t n = 0; n < count; ++n) {
            require(entries[n].phase && entries[n].team && entries[n].report_json, "rank entry has a null field");
            reports.push_back({entries[n].phase, entries[n].team, spinebench::report_from_json(entries[n].report_json)});
        }
        const auto result = spinebench::run_rank(reports, config);
        auto json = spinebench::leaderboard_to_json(result);
        if (out_markdown) *out_markdown = dup_string(spinebench::leaderboard_to_markdown(result));
        *out_json = dup_string(json);
    });
}

sb_status sb_weight_preset(const char* name, char** out_json) {
    return guarded([&] {
        require(name && out_json, "name and out must not be null");
        *out_json = dup_string(spinebench::WeightConfig::preset(name).to_json());
    });
}

sb_status sb_wilcoxon(const double* x, const double* y, size_t n, sb_alternative alternative, sb_pvalue_method method,
                      double* statistic, double* p_value) {
    return guarded([&] {
        require(x && y && statistic && p_value, "pointers must not be null");
        const auto alt = alternative == SB_LESS ? spinebench::Alternative::less : spinebench::Alternative::greater;
        const auto m = method == SB_PVALUE_EXACT    ? spinebench::PValueMethod::exact
                       : method == SB_PVALUE_NORMAL ? spinebench::PValueMethod::normal
                                                    : spinebench::PValueMethod::automatic;
        const auto r = spinebench::wilcoxon_signed_rank({x, n}, {y, n}, alt, m);
        *statistic = r.statistic;
        *p_value = r.p_value.value_or(std::numeric_limits<double>::quiet_NaN());
        if (!r.decided())
            throw spinebench::Error(spinebench::ErrorCode::no_decision, "all paired differences are zero");
    });
}

void sb_mrf_overrides_init(sb_mrf_overrides* overrides) {
    if (!overrides) return;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    *overrides = {nan, nan, nan, nan};
}

sb_status sb_labelseq_solve(const char* candidates_json, const char* stats_json, const sb_mrf_overrides* overrides,
                            char** out_json) {
    return guarded([&] {
        require(candidates_json && stats_json && out_json, "candidates, stats and out must not be null");
        auto file = spinebench::parse_candidate_file(candidates_json);
        if (overrides) {
            if (!std::isnan(overrides->lambda)) file.params.lambda = overrides->lambda;
            if (!std::isnan(overrides->bias)) file.params.bias = overrides->bias;
            if (!std::isnan(overrides->threshold)) file.params.heat_threshold = overrides->threshold;
            if (!std::isnan(overrides->penalty)) file.params.borrow_penalty = overrides->penalty;
        }
        const auto graph = spinebench::build_candidate_graph(
            file.candidates, spinebench::DisplacementStats::from_json(stats_json), file.params);
        *out_json = dup_string(spinebench::sequence_to_json(spinebench::solve_sequence(graph)));
    });
}

sb_status sb_labelseq_stats(const char* centroid_dir, char** out_json) {
    return guarded([&] {
        require(centroid_dir && out_json, "directory and out must not be null");
        const auto sets = spinebench::load_centroid_directory(centroid_dir);
        *out_json = dup_string(spinebench::displacement_stats(sets).to_json());
    });
}

sb_status sb_labelseq_check(const char* centroids_json, char** out_json) {
    return guarded([&] {
        require(centroids_json && out_json, "centroids and out must not be null");
        const auto set = spinebench::parse_centroids(centroids_json, spinebench::CentroidSpace::world);
        *out_json = dup_string(spinebench::violations_to_json(spinebench::check_sequence(set)));
    });
}

sb_status sb_synth(const char* spec_json, const char* out_dir) {
    return guarded([&] {
        require(spec_json && out_dir, "spec and out_dir must not be null");
        spinebench::run_synth(spec_json, out_dir);
    });
}

}  // extern "C"
