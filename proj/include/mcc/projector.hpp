#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mcc/geometry.hpp"
#include "mcc/parallel.hpp"
#include "mcc/types.hpp"

namespace mcc {

/// Per-voxel visit counters from back-projecting a binary mask stack.
/// visits counts views whose mask covers the voxel; max_visits counts views
/// whose detector sees it at all.
struct VisitorVolume {
    VoxelGrid grid;
    std::vector<std::int32_t> visits;
    std::vector<std::int32_t> max_visits;

    VisitorVolume() = default;
    explicit VisitorVolume(const VoxelGrid& g)
        : grid(g), visits(g.voxel_count(), 0), max_visits(g.voxel_count(), 0) {}

    void validate() const {
        grid.validate();
        if (visits.size() != grid.voxel_count() ||
            max_visits.size() != grid.voxel_count())
            throw std::invalid_argument("VisitorVolume: counter length mismatch");
        for (std::size_t i = 0; i < visits.size(); ++i)
            if (visits[i] < 0 || visits[i] > max_visits[i])
                throw std::invalid_argument(
                    "VisitorVolume: need 0 <= visits <= max_visits");
    }
};

/// Normalized visit fraction per voxel, in [0,1].
using ConsistencyVolume = Volume<float>;

namespace detail {

// Walks the ray S->P (parametrized t in [0,1]) through the grid and calls
// visit(flat_index, segment_length_mm) for every voxel it crosses, in
// traversal order. Exact ray-box segment lengths (Siddon/Amanatides-Woo).
template <typename Visit>
void traverse_grid(const VoxelGrid& grid, const std::array<double, 3>& S,
                   const std::array<double, 3>& P, Visit&& visit) {
    const std::array<double, 3> o = grid.origin();
    const std::array<int, 3> n{grid.nx, grid.ny, grid.nz};
    const double vs = grid.voxel_size;

    std::array<double, 3> d{P[0] - S[0], P[1] - S[1], P[2] - S[2]};
    const double ray_len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (!(ray_len > 0)) return;

    double t0 = 0.0, t1 = 1.0;
    for (int a = 0; a < 3; ++a) {
        const double lo = o[a], hi = o[a] + n[a] * vs;
        if (std::abs(d[a]) < 1e-12) {
            if (S[a] < lo || S[a] >= hi) return;
            continue;
        }
        double ta = (lo - S[a]) / d[a];
        double tb = (hi - S[a]) / d[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t1 <= t0) return;

    // entry voxel, nudged inside to avoid landing exactly on a face
    const double t_probe = t0 + 1e-12 * (t1 - t0);
    std::array<int, 3> idx;
    std::array<int, 3> step;
    std::array<double, 3> t_next;   // t of the next boundary crossing per axis
    std::array<double, 3> t_delta;  // t per voxel along each axis
    for (int a = 0; a < 3; ++a) {
        const double pos = S[a] + t_probe * d[a];
        int i = int(std::floor((pos - o[a]) / vs));
        idx[a] = std::clamp(i, 0, n[a] - 1);
        if (std::abs(d[a]) < 1e-12) {
            step[a] = 0;
            t_next[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        } else {
            step[a] = d[a] > 0 ? 1 : -1;
            const double boundary = o[a] + (idx[a] + (step[a] > 0 ? 1 : 0)) * vs;
            t_next[a] = (boundary - S[a]) / d[a];
            t_delta[a] = vs / std::abs(d[a]);
        }
    }

    const std::size_t stride_y = std::size_t(n[0]);
    const std::size_t stride_z = std::size_t(n[0]) * n[1];
    double t_prev = t0;
    while (t_prev < t1) {
        int axis = 0;
        if (t_next[1] < t_next[axis]) axis = 1;
        if (t_next[2] < t_next[axis]) axis = 2;
        const double t_stop = std::min(t_next[axis], t1);
        const double seg = (t_stop - t_prev) * ray_len;
        if (seg > 0) {
            const std::size_t flat =
                std::size_t(idx[2]) * stride_z + std::size_t(idx[1]) * stride_y +
                std::size_t(idx[0]);
            visit(flat, seg);
        }
        if (t_stop >= t1) break;
        t_prev = t_stop;
        idx[axis] += step[axis];
        if (idx[axis] < 0 || idx[axis] >= n[axis]) break;
        t_next[axis] += t_delta[axis];
    }
}

}  // namespace detail

// Line integrals of the volume along the ray from the source through each
// detector pixel center, one ray per pixel.
inline ProjectionStack forward_project(const Volume<float>& vol,
                                       const ProjectionGeometry& geom) {
    vol.validate();
    geom.validate();
    ProjectionStack out(geom, 0.0f);
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    const float* v = vol.data.data();
    parallel_for(std::size_t(geom.n_views) * rows, [&](std::size_t job) {
        const int view = int(job / rows);
        const int row = int(job % rows);
        const double angle = view_angle(geom, view);
        const auto S = source_position(geom, angle);
        float* line = out.view_data(view) + std::size_t(row) * cols;
        for (int col = 0; col < cols; ++col) {
            const auto P = pixel_center_position(geom, angle, row, col);
            double sum = 0.0;
            detail::traverse_grid(vol.grid, S, P,
                                  [&](std::size_t flat, double seg) {
                                      sum += seg * double(v[flat]);
                                  });
            line[col] = float(sum);
        }
    });
    return out;
}

// Back-projects a binary mask stack into per-voxel visit counters: each voxel
// center is projected into every view and the mask is sampled at the nearest
// pixel. max_visits counts the views where the center lands on the detector.
inline VisitorVolume backproject_visitors(const MaskStack& masks,
                                          const VoxelGrid& grid) {
    masks.validate();
    grid.validate();
    const ProjectionGeometry& geom = masks.geom;
    std::vector<double> cs(geom.n_views), sn(geom.n_views);
    for (int i = 0; i < geom.n_views; ++i) {
        const double a = view_angle(geom, i);
        cs[i] = std::cos(a);
        sn[i] = std::sin(a);
    }
    VisitorVolume out(grid);
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    const std::size_t slab = std::size_t(grid.nx) * grid.ny;
    parallel_for(std::size_t(grid.nz), [&](std::size_t iz) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int ix = 0; ix < grid.nx; ++ix) {
                const auto p = grid.voxel_center(ix, iy, int(iz));
                std::int32_t seen = 0, hit = 0;
                for (int i = 0; i < geom.n_views; ++i) {
                    const double depth =
                        geom.source_axis_distance - (p[0] * cs[i] + p[1] * sn[i]);
                    if (!(depth > 0)) continue;
                    const double mag = geom.source_detector_distance / depth;
                    const double u =
                        (-p[0] * sn[i] + p[1] * cs[i]) * mag / geom.pixel_pitch +
                        0.5 * cols;
                    const double v =
                        p[2] * mag / geom.pixel_pitch + 0.5 * rows;
                    if (!(u >= 0 && u < cols && v >= 0 && v < rows)) continue;
                    ++seen;
                    if (masks.data[(std::size_t(i) * rows + int(v)) * cols +
                                   int(u)])
                        ++hit;
                }
                const std::size_t flat = iz * slab + std::size_t(iy) * grid.nx + ix;
                out.visits[flat] = hit;
                out.max_visits[flat] = seen;
            }
        }
    });
    return out;
}

// visits / max_visits per voxel; voxels no view can see are assigned 0.
inline ConsistencyVolume normalize_visitors(const VisitorVolume& vv) {
    vv.validate();
    ConsistencyVolume out(vv.grid, 0.0f);
    parallel_for(vv.visits.size(), [&](std::size_t i) {
        out.data[i] = vv.max_visits[i] > 0
                          ? float(double(vv.visits[i]) / double(vv.max_visits[i]))
                          : 0.0f;
    });
    return out;
}

// Forward-projects a binary volume; a pixel is on iff its ray crosses more
// than eps mm of mask voxels.
inline MaskStack reproject_mask(const Volume<std::uint8_t>& mask3d,
                                const ProjectionGeometry& geom, double eps) {
    mask3d.validate();
    geom.validate();
    if (eps < 0) throw std::invalid_argument("reproject_mask: eps must be >= 0");
    MaskStack out(geom, 0);
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    const std::uint8_t* m = mask3d.data.data();
    parallel_for(std::size_t(geom.n_views) * rows, [&](std::size_t job) {
        const int view = int(job / rows);
        const int row = int(job % rows);
        const double angle = view_angle(geom, view);
        const auto S = source_position(geom, angle);
        std::uint8_t* line = out.view_data(view) + std::size_t(row) * cols;
        for (int col = 0; col < cols; ++col) {
            const auto P = pixel_center_position(geom, angle, row, col);
            double inside_len = 0.0;
            detail::traverse_grid(mask3d.grid, S, P,
                                  [&](std::size_t flat, double seg) {
                                      if (m[flat]) inside_len += seg;
                                  });
            line[col] = inside_len > eps ? 1 : 0;
        }
    });
    return out;
}

}  // namespace mcc
