#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mcc/parallel.hpp"
#include "mcc/types.hpp"

namespace mcc {

inline double deg_to_rad(double deg) { return deg * (pi / 180.0); }

/**
 * Circular short-scan cone-beam acquisition.
 *
 * The source orbits the z axis at radius source_axis_distance; the flat
 * detector faces it at source_detector_distance, row direction parallel to
 * the rotation axis. The isocenter projects onto the exact detector center
 * (detector_cols/2, detector_rows/2) at every view.
 */
struct ProjectionGeometry {
    double source_axis_distance = 622.0;      // mm
    double source_detector_distance = 1164.0; // mm
    int detector_cols = 976;
    int detector_rows = 976;
    double pixel_pitch = 0.308;               // mm/pixel
    int n_views = 400;
    double scan_arc = 200.0;                  // degrees
    double start_angle = 0.0;                 // degrees

    void validate() const {
        if (!(source_detector_distance > source_axis_distance &&
              source_axis_distance > 0))
            throw std::invalid_argument(
                "ProjectionGeometry: need source_detector_distance > "
                "source_axis_distance > 0");
        if (n_views < 1)
            throw std::invalid_argument("ProjectionGeometry: n_views must be >= 1");
        if (detector_cols < 1 || detector_rows < 1)
            throw std::invalid_argument(
                "ProjectionGeometry: detector dimensions must be >= 1");
        if (!(pixel_pitch > 0))
            throw std::invalid_argument("ProjectionGeometry: pixel_pitch must be > 0");
        if (!(scan_arc > 0 && scan_arc <= 360))
            throw std::invalid_argument(
                "ProjectionGeometry: scan_arc must be in (0, 360]");
    }

    std::size_t pixels_per_view() const {
        return std::size_t(detector_rows) * detector_cols;
    }

    double magnification() const {
        return source_detector_distance / source_axis_distance;
    }

    bool operator==(const ProjectionGeometry&) const = default;
};

/// Continuous detector coordinates in pixels; inside iff 0 <= u < cols and
/// 0 <= v < rows.
struct DetectorCoord {
    double u = 0;
    double v = 0;
    bool inside = false;
};

// Gantry angle of view i, radians. Views are spaced evenly over the arc,
// endpoints included; a single view sits at the start angle.
inline double view_angle(const ProjectionGeometry& geom, int i) {
    if (i < 0 || i >= geom.n_views)
        throw std::out_of_range("view_angle: view index out of range");
    if (geom.n_views == 1) return deg_to_rad(geom.start_angle);
    return deg_to_rad(geom.start_angle +
                      double(i) * geom.scan_arc / double(geom.n_views - 1));
}

inline std::array<double, 3> source_position(const ProjectionGeometry& geom,
                                             double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {geom.source_axis_distance * c, geom.source_axis_distance * s, 0.0};
}

// Position of the center of detector pixel (row, col) in mm.
inline std::array<double, 3> pixel_center_position(const ProjectionGeometry& geom,
                                                   double angle, int row, int col) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double u_mm = (col + 0.5 - 0.5 * geom.detector_cols) * geom.pixel_pitch;
    const double v_mm = (row + 0.5 - 0.5 * geom.detector_rows) * geom.pixel_pitch;
    const double d = geom.source_axis_distance - geom.source_detector_distance;
    // detector center + u_mm * e_u + v_mm * e_v, with e_u = (-s, c, 0), e_v = z
    return {d * c - u_mm * s, d * s + u_mm * c, v_mm};
}

// Perspective projection of point p (mm) onto the detector at the given
// gantry angle. Points on or behind the source plane are marked not-inside
// with NaN coordinates.
inline DetectorCoord project_point(const ProjectionGeometry& geom, double angle,
                                   const std::array<double, 3>& p) {
    const double c = std::cos(angle), s = std::sin(angle);
    // depth of p along the source->isocenter axis
    const double depth = geom.source_axis_distance - (p[0] * c + p[1] * s);
    if (!(depth > 0)) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan, false};
    }
    const double mag = geom.source_detector_distance / depth;
    const double u_mm = (-p[0] * s + p[1] * c) * mag;
    const double v_mm = p[2] * mag;
    DetectorCoord out;
    out.u = u_mm / geom.pixel_pitch + 0.5 * geom.detector_cols;
    out.v = v_mm / geom.pixel_pitch + 0.5 * geom.detector_rows;
    out.inside = out.u >= 0 && out.u < geom.detector_cols && out.v >= 0 &&
                 out.v < geom.detector_rows;
    return out;
}

/**
 * Per-view 2D detector images for a whole scan.
 *
 * Storage is C-order with view slowest: index = (view*rows + row)*cols + col.
 */
template <typename T>
struct Stack {
    ProjectionGeometry geom;
    std::vector<T> data;

    Stack() = default;
    explicit Stack(const ProjectionGeometry& g, T fill = T{})
        : geom(g),
          data(std::size_t(g.n_views) * g.pixels_per_view(), fill) {
        geom.validate();
    }

    std::size_t index(int view, int row, int col) const {
        return (std::size_t(view) * geom.detector_rows + row) * geom.detector_cols +
               col;
    }
    T& at(int view, int row, int col) { return data[index(view, row, col)]; }
    const T& at(int view, int row, int col) const {
        return data[index(view, row, col)];
    }

    T* view_data(int view) { return data.data() + index(view, 0, 0); }
    const T* view_data(int view) const { return data.data() + index(view, 0, 0); }

    void validate() const {
        geom.validate();
        if (data.size() != std::size_t(geom.n_views) * geom.pixels_per_view())
            throw std::invalid_argument("Stack: data length != n_views*rows*cols");
    }

    bool operator==(const Stack&) const = default;
};

using ProjectionStack = Stack<float>;   // line integrals, dimensionless
using SoftMaskStack = Stack<float>;     // confidences in [0,1]
using MaskStack = Stack<std::uint8_t>;  // binary {0,1}

// Number of views whose detector sees each voxel center: the normalizer that
// accounts for the reduced number of rays outside the field of view.
inline Volume<std::int32_t> max_visitors(const ProjectionGeometry& geom,
                                         const VoxelGrid& grid) {
    geom.validate();
    grid.validate();
    std::vector<double> cs(geom.n_views), sn(geom.n_views);
    for (int i = 0; i < geom.n_views; ++i) {
        const double a = view_angle(geom, i);
        cs[i] = std::cos(a);
        sn[i] = std::sin(a);
    }
    Volume<std::int32_t> out(grid, 0);
    const std::size_t slab = std::size_t(grid.nx) * grid.ny;
    parallel_for(std::size_t(grid.nz), [&](std::size_t iz) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int ix = 0; ix < grid.nx; ++ix) {
                const auto p = grid.voxel_center(ix, iy, int(iz));
                std::int32_t n = 0;
                for (int i = 0; i < geom.n_views; ++i) {
                    const double depth =
                        geom.source_axis_distance - (p[0] * cs[i] + p[1] * sn[i]);
                    if (!(depth > 0)) continue;
                    const double mag = geom.source_detector_distance / depth;
                    const double u = (-p[0] * sn[i] + p[1] * cs[i]) * mag /
                                         geom.pixel_pitch +
                                     0.5 * geom.detector_cols;
                    const double v = p[2] * mag / geom.pixel_pitch +
                                     0.5 * geom.detector_rows;
                    if (u >= 0 && u < geom.detector_cols && v >= 0 &&
                        v < geom.detector_rows)
                        ++n;
                }
                out.data[iz * slab + std::size_t(iy) * grid.nx + ix] = n;
            }
        }
    });
    return out;
}

}  // namespace mcc
