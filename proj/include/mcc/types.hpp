#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mcc {

inline constexpr double pi = 3.14159265358979323846;

/**
 * A 3D voxel lattice with physical placement.
 *
 * The grid is an axis-aligned box of nx*ny*nz isotropic voxels whose center
 * sits at `center_offset` (mm, relative to the isocenter). Voxel (0,0,0) is
 * the corner with the smallest coordinates.
 */
struct VoxelGrid {
    int nx = 1;
    int ny = 1;
    int nz = 1;
    double voxel_size = 1.0;                       // mm, isotropic
    std::array<double, 3> center_offset{0, 0, 0};  // mm

    void validate() const {
        if (nx < 1 || ny < 1 || nz < 1)
            throw std::invalid_argument("VoxelGrid: voxel counts must be >= 1");
        if (!(voxel_size > 0))
            throw std::invalid_argument("VoxelGrid: voxel_size must be > 0");
    }

    std::size_t voxel_count() const {
        return std::size_t(nx) * std::size_t(ny) * std::size_t(nz);
    }

    // Minimum-coordinate corner of the box, in mm.
    std::array<double, 3> origin() const {
        return {center_offset[0] - 0.5 * nx * voxel_size,
                center_offset[1] - 0.5 * ny * voxel_size,
                center_offset[2] - 0.5 * nz * voxel_size};
    }

    std::array<double, 3> voxel_center(int ix, int iy, int iz) const {
        const auto o = origin();
        return {o[0] + (ix + 0.5) * voxel_size,
                o[1] + (iy + 0.5) * voxel_size,
                o[2] + (iz + 0.5) * voxel_size};
    }

    double half_extent(int axis) const {
        const int n = axis == 0 ? nx : axis == 1 ? ny : nz;
        return 0.5 * n * voxel_size;
    }

    bool operator==(const VoxelGrid&) const = default;
};

// True if `outer` spatially contains `inner` (with a tiny slack for
// floating-point box arithmetic).
inline bool grid_contains(const VoxelGrid& outer, const VoxelGrid& inner) {
    constexpr double slack = 1e-9;
    for (int a = 0; a < 3; ++a) {
        const double o_lo = outer.center_offset[a] - outer.half_extent(a);
        const double o_hi = outer.center_offset[a] + outer.half_extent(a);
        const double i_lo = inner.center_offset[a] - inner.half_extent(a);
        const double i_hi = inner.center_offset[a] + inner.half_extent(a);
        if (i_lo < o_lo - slack || i_hi > o_hi + slack) return false;
    }
    return true;
}

/**
 * 3D scalar field over a VoxelGrid.
 *
 * Storage is C-order with z slowest: index = (iz*ny + iy)*nx + ix.
 */
template <typename T>
struct Volume {
    VoxelGrid grid;
    std::vector<T> data;

    Volume() = default;
    explicit Volume(const VoxelGrid& g, T fill = T{})
        : grid(g), data(g.voxel_count(), fill) {
        grid.validate();
    }

    std::size_t index(int ix, int iy, int iz) const {
        return (std::size_t(iz) * grid.ny + iy) * grid.nx + ix;
    }
    T& at(int ix, int iy, int iz) { return data[index(ix, iy, iz)]; }
    const T& at(int ix, int iy, int iz) const { return data[index(ix, iy, iz)]; }

    void validate() const {
        grid.validate();
        if (data.size() != grid.voxel_count())
            throw std::invalid_argument("Volume: data length != nx*ny*nz");
    }

    bool operator==(const Volume&) const = default;
};

/**
 * A single 2D image, row-major.
 */
template <typename T>
struct Image2D {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Image2D() = default;
    Image2D(int rows_, int cols_, T fill = T{})
        : rows(rows_), cols(cols_), data(std::size_t(rows_) * cols_, fill) {
        if (rows_ < 0 || cols_ < 0)
            throw std::invalid_argument("Image2D: negative dimensions");
    }

    T& at(int r, int c) { return data[std::size_t(r) * cols + c]; }
    const T& at(int r, int c) const { return data[std::size_t(r) * cols + c]; }

    bool operator==(const Image2D&) const = default;
};

}  // namespace mcc
