#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mcc/geometry.hpp"
#include "mcc/projector.hpp"
#include "mcc/types.hpp"

namespace mcc {

/**
 * Consistency-check configuration.
 *
 * cc_grid is the extended counting grid; it must be large enough to contain
 * every metal part that appears in the projections (in particular it should
 * spatially contain the diagnostic grid). tau is the fraction of possible
 * visitors required to accept a voxel as metal.
 */
struct CCConfig {
    VoxelGrid cc_grid;
    double tau = 0.95;
    double reproject_eps = -1.0;   // mm; negative selects voxel_size / 2
    bool keep_intermediates = true;

    double effective_eps() const {
        return reproject_eps < 0 ? 0.5 * cc_grid.voxel_size : reproject_eps;
    }

    void validate() const {
        cc_grid.validate();
        if (!(tau >= 0 && tau <= 1))
            throw std::invalid_argument("CCConfig: tau must be in [0,1]");
    }
};

struct CCResult {
    MaskStack consistent_masks;
    ConsistencyVolume consistency;     // empty when keep_intermediates is off
    Volume<std::uint8_t> metal3d;      // empty when keep_intermediates is off
    std::vector<std::int64_t> removed_pixels;   // per view: input pixels dropped
    std::vector<std::int64_t> retained_pixels;  // per view: input pixels kept
};

// Binary 3D metal mask: voxel accepted iff its consistency value >= tau.
// The comparison is inclusive, so tau = 0.95 keeps exactly the parts
// segmented in at least 95% of the projections that can see them.
inline Volume<std::uint8_t> threshold_consistency(const ConsistencyVolume& c,
                                                  double tau) {
    c.validate();
    if (!(tau >= 0 && tau <= 1))
        throw std::invalid_argument("threshold_consistency: tau must be in [0,1]");
    Volume<std::uint8_t> out(c.grid, 0);
    const float cut = float(tau);
    for (std::size_t i = 0; i < c.data.size(); ++i)
        out.data[i] = c.data[i] >= cut ? 1 : 0;
    return out;
}

namespace detail {

inline void count_removed_retained(const MaskStack& input,
                                   const MaskStack& output,
                                   std::vector<std::int64_t>& removed,
                                   std::vector<std::int64_t>& retained) {
    const int n_views = input.geom.n_views;
    const std::size_t px = input.geom.pixels_per_view();
    removed.assign(n_views, 0);
    retained.assign(n_views, 0);
    for (int v = 0; v < n_views; ++v) {
        const std::uint8_t* in = input.view_data(v);
        const std::uint8_t* out = output.view_data(v);
        std::int64_t rem = 0, ret = 0;
        for (std::size_t i = 0; i < px; ++i) {
            if (in[i]) (out[i] ? ret : rem) += 1;
        }
        removed[v] = rem;
        retained[v] = ret;
    }
}

}  // namespace detail

// The consistency check: back-project the binarized stack into visitor
// counters on the extended grid, normalize by the per-voxel maximum, keep
// voxels at or above tau, and forward-project the resulting 3D metal mask
// back into a mutually consistent stack of 2D masks.
inline CCResult consistency_check(const MaskStack& masks, const CCConfig& cfg) {
    masks.validate();
    cfg.validate();
    const VisitorVolume visitors = backproject_visitors(masks, cfg.cc_grid);
    ConsistencyVolume consistency = normalize_visitors(visitors);
    Volume<std::uint8_t> metal3d = threshold_consistency(consistency, cfg.tau);
    CCResult result;
    result.consistent_masks =
        reproject_mask(metal3d, masks.geom, cfg.effective_eps());
    detail::count_removed_retained(masks, result.consistent_masks,
                                   result.removed_pixels, result.retained_pixels);
    if (cfg.keep_intermediates) {
        result.consistency = std::move(consistency);
        result.metal3d = std::move(metal3d);
    }
    return result;
}

// One consistency check per tau, sharing a single back-projection. Higher
// taus can only shrink the 3D mask, so outputs are nested decreasing.
inline std::vector<std::pair<double, CCResult>> cc_sweep(
    const MaskStack& masks, const CCConfig& cfg,
    const std::vector<double>& taus) {
    masks.validate();
    cfg.validate();
    for (double tau : taus)
        if (!(tau >= 0 && tau <= 1))
            throw std::invalid_argument("cc_sweep: tau must be in [0,1]");
    const VisitorVolume visitors = backproject_visitors(masks, cfg.cc_grid);
    const ConsistencyVolume consistency = normalize_visitors(visitors);
    std::vector<std::pair<double, CCResult>> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        Volume<std::uint8_t> metal3d = threshold_consistency(consistency, tau);
        CCResult result;
        result.consistent_masks =
            reproject_mask(metal3d, masks.geom, cfg.effective_eps());
        detail::count_removed_retained(masks, result.consistent_masks,
                                       result.removed_pixels,
                                       result.retained_pixels);
        if (cfg.keep_intermediates) {
            result.consistency = consistency;
            result.metal3d = std::move(metal3d);
        }
        out.emplace_back(tau, std::move(result));
    }
    return out;
}

// Extended-grid sizing: an isocentered cube at 1.8x the diagnostic FOV
// radius. The exact union of the view cones is unbounded toward the source
// orbit, so the extension factor is a fixed margin rather than derived.
inline VoxelGrid auto_cc_grid(const ProjectionGeometry& geom, double voxel_size) {
    geom.validate();
    if (!(voxel_size > 0))
        throw std::invalid_argument("auto_cc_grid: voxel_size must be > 0");
    const double fov_radius = 0.5 * geom.detector_cols * geom.pixel_pitch /
                              geom.magnification();
    const double half = 1.8 * fov_radius;
    const int n = std::max(1, int(std::ceil(2.0 * half / voxel_size)));
    VoxelGrid grid;
    grid.nx = grid.ny = grid.nz = n;
    grid.voxel_size = voxel_size;
    return grid;
}

}  // namespace mcc
