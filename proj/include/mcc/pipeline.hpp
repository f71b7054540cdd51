#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcc/consistency.hpp"
#include "mcc/io.hpp"
#include "mcc/metrics.hpp"
#include "mcc/phantom.hpp"
#include "mcc/projector.hpp"
#include "mcc/segsim.hpp"

namespace mcc {

inline constexpr const char* version_string = "0.1.0";

/**
 * Everything one experiment run needs. Fields other than output_dir are
 * semantic: they feed the manifest's config hash.
 */
struct ExperimentConfig {
    ProjectionGeometry geometry;
    VoxelGrid diagnostic_grid;
    VoxelGrid cc_grid;
    std::string scene_key = "in_fov";  // ignored when `scene` is set
    std::optional<Scene> scene;
    PerturbationConfig perturbation;
    std::vector<double> thresholds{5, 30, 55};
    double tau = 0.95;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    double gt_delta = 0.1;             // line-integral cut for GT subtraction
    double i0 = 1.0;                   // emitted intensity for the Beer round trip
    bool simulate_intensities = true;  // exercise intensity->log conversion
    double reproject_eps = -1.0;       // mm; negative selects cc voxel_size / 2
    std::string scorer_mode = "perturbation";  // or "stitch"
    double stitch_threshold = 3.0;     // line-integral cut for the patch scorer
    PatchPlan patch_plan{32, 32};

    void validate() const {
        geometry.validate();
        diagnostic_grid.validate();
        cc_grid.validate();
        if (!grid_contains(cc_grid, diagnostic_grid))
            throw std::invalid_argument(
                "ExperimentConfig: cc_grid must spatially contain the "
                "diagnostic grid");
        perturbation.validate();
        if (!(tau >= 0 && tau <= 1))
            throw std::invalid_argument("ExperimentConfig: tau must be in [0,1]");
        for (double t : thresholds)
            if (!(t > 0 && t < 100))
                throw std::invalid_argument(
                    "ExperimentConfig: thresholds must be in (0, 100)");
        if (!(gt_delta > 0))
            throw std::invalid_argument("ExperimentConfig: gt_delta must be > 0");
        if (!(i0 > 0))
            throw std::invalid_argument("ExperimentConfig: i0 must be > 0");
        if (scorer_mode != "perturbation" && scorer_mode != "stitch")
            throw std::invalid_argument(
                "ExperimentConfig: scorer_mode must be 'perturbation' or "
                "'stitch'");
        if (!scene && scene_key.empty())
            throw std::invalid_argument(
                "ExperimentConfig: need a scene or a catalog scene_key");
    }

    CCConfig cc_config() const {
        CCConfig cfg;
        cfg.cc_grid = cc_grid;
        cfg.tau = tau;
        cfg.reproject_eps = reproject_eps;
        return cfg;
    }

    // Inline scene, or the named catalog entry scaled to this config's grids.
    Scene resolve_scene() const {
        if (scene) return *scene;
        const double fov_radius = std::min(
            {diagnostic_grid.half_extent(0), diagnostic_grid.half_extent(1),
             diagnostic_grid.half_extent(2)});
        const double cc_radius =
            std::min({cc_grid.half_extent(0), cc_grid.half_extent(1),
                      cc_grid.half_extent(2)});
        auto catalog = standard_phantoms(fov_radius, cc_radius);
        auto it = catalog.find(scene_key);
        if (it == catalog.end())
            throw std::invalid_argument("ExperimentConfig: unknown scene key '" +
                                        scene_key + "'");
        return it->second;
    }
};

// Desk-scale defaults: 96x96 detector over 100 views, 64^3 diagnostic and
// 96^3 extended grid at 1 mm voxels. Small enough for test runs.
inline ExperimentConfig desk_profile() {
    ExperimentConfig cfg;
    cfg.geometry.source_axis_distance = 622.0;
    cfg.geometry.source_detector_distance = 1164.0;
    cfg.geometry.detector_cols = 96;
    cfg.geometry.detector_rows = 96;
    cfg.geometry.pixel_pitch = 1.6;
    cfg.geometry.n_views = 100;
    cfg.geometry.scan_arc = 200.0;
    cfg.geometry.start_angle = 0.0;
    cfg.diagnostic_grid = VoxelGrid{64, 64, 64, 1.0};
    cfg.cc_grid = VoxelGrid{96, 96, 96, 1.0};
    cfg.perturbation.fp_blob_rate = 1.5;
    cfg.perturbation.fp_blob_radius = {2.0, 4.0};
    cfg.perturbation.fp_confidence = {0.04, 0.5};
    cfg.perturbation.fp_persistence = {1, 3};
    cfg.perturbation.fn_dropout_rate = 0.1;
    cfg.perturbation.fn_erosion_radius = 1.0;
    cfg.perturbation.gt_confidence = {0.6, 1.0};
    return cfg;
}

// Full-scale profile: 976^2 detector over 400 views, 512^3 diagnostic and
// 920^3 extended grid at 0.31 mm voxels. Hours of CPU and tens of GB.
inline ExperimentConfig paper_profile() {
    ExperimentConfig cfg = desk_profile();
    cfg.geometry.detector_cols = 976;
    cfg.geometry.detector_rows = 976;
    cfg.geometry.pixel_pitch = 0.308;
    cfg.geometry.n_views = 400;
    cfg.diagnostic_grid = VoxelGrid{512, 512, 512, 0.31};
    cfg.cc_grid = VoxelGrid{920, 920, 920, 0.31};
    return cfg;
}

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"geometry", c.geometry},
             {"diagnostic_grid", c.diagnostic_grid},
             {"cc_grid", c.cc_grid},
             {"perturbation", c.perturbation},
             {"thresholds", c.thresholds},
             {"tau", c.tau},
             {"seed", c.seed},
             {"output_dir", c.output_dir},
             {"gt_delta", c.gt_delta},
             {"i0", c.i0},
             {"simulate_intensities", c.simulate_intensities},
             {"reproject_eps", c.reproject_eps},
             {"scorer_mode", c.scorer_mode},
             {"stitch_threshold", c.stitch_threshold},
             {"patch_plan", c.patch_plan}};
    if (c.scene)
        j["scene"] = *c.scene;
    else
        j["scene"] = c.scene_key;
}

inline void from_json(const json& j, ExperimentConfig& c) {
    const std::string ctx = "ExperimentConfig";
    detail::check_keys(
        j, {"geometry", "diagnostic_grid", "cc_grid", "scene", "perturbation",
            "thresholds", "tau", "seed", "output_dir", "gt_delta", "i0",
            "simulate_intensities", "reproject_eps", "scorer_mode",
            "stitch_threshold", "patch_plan"},
        ctx);
    if (j.contains("geometry")) c.geometry = j["geometry"].get<ProjectionGeometry>();
    if (j.contains("diagnostic_grid"))
        c.diagnostic_grid = j["diagnostic_grid"].get<VoxelGrid>();
    if (j.contains("cc_grid")) c.cc_grid = j["cc_grid"].get<VoxelGrid>();
    if (j.contains("scene")) {
        if (j["scene"].is_string()) {
            c.scene_key = j["scene"].get<std::string>();
            c.scene.reset();
        } else {
            c.scene = j["scene"].get<Scene>();
        }
    }
    bool perturbation_seed_given = false;
    if (j.contains("perturbation")) {
        perturbation_seed_given = j["perturbation"].contains("seed");
        c.perturbation = j["perturbation"].get<PerturbationConfig>();
    }
    if (j.contains("thresholds"))
        c.thresholds = j["thresholds"].get<std::vector<double>>();
    if (j.contains("tau")) c.tau = j["tau"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (!perturbation_seed_given) c.perturbation.seed = c.seed;
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("gt_delta")) c.gt_delta = j["gt_delta"].get<double>();
    if (j.contains("i0")) c.i0 = j["i0"].get<double>();
    if (j.contains("simulate_intensities"))
        c.simulate_intensities = j["simulate_intensities"].get<bool>();
    if (j.contains("reproject_eps"))
        c.reproject_eps = j["reproject_eps"].get<double>();
    if (j.contains("scorer_mode"))
        c.scorer_mode = j["scorer_mode"].get<std::string>();
    if (j.contains("stitch_threshold"))
        c.stitch_threshold = j["stitch_threshold"].get<double>();
    if (j.contains("patch_plan")) c.patch_plan = j["patch_plan"].get<PatchPlan>();
    c.validate();
}

// Hash of the semantic config fields; identical runs share it, any semantic
// change moves it. output_dir does not affect artifact content.
inline std::string config_hash(const ExperimentConfig& cfg) {
    json j = cfg;
    j.erase("output_dir");
    return hash_hex(fnv1a64(j.dump()));
}

namespace detail {

inline std::string threshold_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    std::string s(buf);
    for (auto& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

}  // namespace detail

// ---- pipeline stages ----
// Each stage reads its inputs from the output directory and writes its
// artifacts there, so the staged CLI and the monolithic pipeline produce
// byte-identical results.

inline void stage_phantom(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    const Scene scene = cfg.resolve_scene();
    auto [with_metal, without_metal] = split_metal(scene);
    write_text_file(dir / "scene_with_metal.json", json(with_metal).dump(2) + "\n");
    write_text_file(dir / "scene_without_metal.json",
                    json(without_metal).dump(2) + "\n");
    write_volume(dir / "vol_with_metal.f32", voxelize(with_metal, cfg.cc_grid),
                 "attenuation");
    write_volume(dir / "vol_without_metal.f32",
                 voxelize(without_metal, cfg.cc_grid), "attenuation");
}

inline void stage_project(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    const auto vol_with = read_volume<float>(dir / "vol_with_metal.f32");
    const auto vol_without = read_volume<float>(dir / "vol_without_metal.f32");

    auto project = [&](const Volume<float>& vol) {
        ProjectionStack line = forward_project(vol, cfg.geometry);
        if (cfg.simulate_intensities) {
            // measured intensities, then back to line integrals
            ProjectionStack intensities(cfg.geometry, 0.0f);
            for (std::size_t i = 0; i < line.data.size(); ++i)
                intensities.data[i] =
                    float(cfg.i0 * std::exp(-double(line.data[i])));
            line = lambert_beer(intensities, cfg.i0);
        }
        return line;
    };
    const ProjectionStack proj_with = project(vol_with);
    const ProjectionStack proj_without = project(vol_without);
    write_stack(dir / "proj_with_metal.f32", proj_with, "line_integral");
    write_stack(dir / "proj_without_metal.f32", proj_without, "line_integral");
    const int mid = cfg.geometry.n_views / 2;
    export_pgm(stack_view_image(proj_with, mid),
               dir / ("projection_view" + std::to_string(mid) + ".pgm"));
}

inline void stage_segment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    const auto proj_with = read_stack<float>(dir / "proj_with_metal.f32");
    const auto proj_without = read_stack<float>(dir / "proj_without_metal.f32");
    const MaskStack gt = gt_masks(proj_with, proj_without, cfg.gt_delta);
    SoftMaskStack soft =
        cfg.scorer_mode == "stitch"
            ? stitch_segment_stack(proj_with, cfg.stitch_threshold, cfg.patch_plan)
            : simulate_soft_masks(gt, cfg.perturbation);
    write_stack(dir / "gt_masks.u8", gt, "mask");
    write_stack(dir / "soft_masks.f32", soft, "soft_mask");
    const int mid = cfg.geometry.n_views / 2;
    export_pgm(stack_view_image(gt, mid),
               dir / ("gt_view" + std::to_string(mid) + ".pgm"));
    export_pgm(stack_view_image(soft, mid),
               dir / ("soft_view" + std::to_string(mid) + ".pgm"));
}

inline void stage_cc(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    const auto soft = read_stack<float>(dir / "soft_masks.f32");
    const int mid = cfg.geometry.n_views / 2;
    for (double threshold : cfg.thresholds) {
        const std::string tag = detail::threshold_tag(threshold);
        const MaskStack binarized = binarize(soft, threshold);
        const CCResult cc = consistency_check(binarized, cfg.cc_config());
        write_stack(dir / ("masks_thr" + tag + ".u8"), binarized, "mask");
        write_stack(dir / ("cc_masks_thr" + tag + ".u8"), cc.consistent_masks,
                    "mask");
        write_volume(dir / ("consistency_thr" + tag + ".f32"), cc.consistency,
                     "consistency");
        write_volume(dir / ("metal3d_thr" + tag + ".u8"), cc.metal3d, "mask");
        json counts{{"threshold", threshold},
                    {"removed_pixels", cc.removed_pixels},
                    {"retained_pixels", cc.retained_pixels}};
        write_text_file(dir / ("cc_counts_thr" + tag + ".json"),
                        counts.dump(2) + "\n");
        export_pgm(stack_view_image(binarized, mid),
                   dir / ("mask_thr" + tag + "_view" + std::to_string(mid) + ".pgm"));
        export_pgm(
            stack_view_image(cc.consistent_masks, mid),
            dir / ("cc_mask_thr" + tag + "_view" + std::to_string(mid) + ".pgm"));
    }
}

inline json metrics_report_json(const MetricsReport& r) {
    json per_view = json::array();
    for (const auto& m : r.per_view)
        per_view.push_back(json{{"iou", m.iou},
                                {"dice", m.dice},
                                {"precision", m.precision},
                                {"recall", m.recall}});
    json agg{{"iou", {{"mean", r.iou.mean}, {"std", r.iou.std_dev}}},
             {"dice", {{"mean", r.dice.mean}, {"std", r.dice.std_dev}}},
             {"precision",
              {{"mean", r.precision.mean}, {"std", r.precision.std_dev}}},
             {"recall", {{"mean", r.recall.mean}, {"std", r.recall.std_dev}}}};
    json out{{"per_view", per_view}, {"aggregate", agg}};
    if (r.auc) out["auc"] = *r.auc;
    return out;
}

inline std::string format_metrics_table(const std::vector<ExperimentRow>& rows) {
    char buf[256];
    std::string out =
        "Thres.  CC   Avg. IoU       Avg. Dice      Avg. Precision  Avg. "
        "Recall\n";
    for (const auto& row : rows) {
        std::snprintf(
            buf, sizeof buf,
            "%-7g %-4s %.3f±%.3f    %.3f±%.3f    %.3f±%.3f     "
            "%.3f±%.3f\n",
            row.threshold, row.cc ? "yes" : "no", row.report.iou.mean,
            row.report.iou.std_dev, row.report.dice.mean, row.report.dice.std_dev,
            row.report.precision.mean, row.report.precision.std_dev,
            row.report.recall.mean, row.report.recall.std_dev);
        out += buf;
    }
    return out;
}

inline void stage_metrics(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output_dir);
    const auto gt = read_stack<std::uint8_t>(dir / "gt_masks.u8");
    const auto soft = read_stack<float>(dir / "soft_masks.f32");

    std::vector<ExperimentRow> rows;
    for (double threshold : cfg.thresholds) {
        const std::string tag = detail::threshold_tag(threshold);
        const auto binarized = read_stack<std::uint8_t>(dir / ("masks_thr" + tag + ".u8"));
        const auto cc_masks =
            read_stack<std::uint8_t>(dir / ("cc_masks_thr" + tag + ".u8"));
        rows.push_back({threshold, false, mask_metrics(binarized, gt)});
        rows.push_back({threshold, true, mask_metrics(cc_masks, gt)});
    }

    json grid = json::array();
    for (const auto& row : rows)
        grid.push_back(json{{"threshold", row.threshold},
                            {"cc", row.cc},
                            {"metrics", metrics_report_json(row.report)}});
    json report{{"grid", grid}, {"auc_granularity", "pooled_pixels"}};
    // AUC needs both classes in the ground truth
    bool has_pos = false, has_neg = false;
    for (auto m : gt.data) (m ? has_pos : has_neg) = true;
    if (has_pos && has_neg) report["auc"] = roc_auc(soft, gt);
    write_text_file(dir / "metrics.json", report.dump(2) + "\n");
    write_text_file(dir / "metrics_table.txt", format_metrics_table(rows));
}

struct PipelineResult {
    int exit_status = 0;
    std::string failed_stage;
    std::string error;
};

// Runs every stage in order and writes the run manifest. On failure the
// manifest records the failing stage and partial artifacts are kept.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    PipelineResult result;
    json semantic_config = cfg;
    semantic_config.erase("output_dir");  // keeps artifacts byte-identical
    json manifest{{"version", version_string},
                  {"seed", cfg.seed},
                  {"config_hash", config_hash(cfg)},
                  {"config", semantic_config},
                  {"stages", json::array()},
                  {"failed_stage", nullptr}};

    const std::pair<const char*, void (*)(const ExperimentConfig&)> stages[] = {
        {"phantom", stage_phantom},
        {"project", stage_project},
        {"segment-sim", stage_segment},
        {"cc", stage_cc},
        {"metrics", stage_metrics}};
    for (const auto& [name, fn] : stages) {
        try {
            fn(cfg);
        } catch (const std::exception& e) {
            result.exit_status = 1;
            result.failed_stage = name;
            result.error = e.what();
            manifest["failed_stage"] = name;
            manifest["error"] = e.what();
            break;
        }
        manifest["stages"].push_back(name);
    }
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return result;
}

}  // namespace mcc
