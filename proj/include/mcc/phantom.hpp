#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mcc/parallel.hpp"
#include "mcc/types.hpp"

namespace mcc {

enum class Shape { sphere, cylinder, box, capsule };

inline const char* shape_name(Shape s) {
    switch (s) {
        case Shape::sphere: return "sphere";
        case Shape::cylinder: return "cylinder";
        case Shape::box: return "box";
        case Shape::capsule: return "capsule";
    }
    throw std::invalid_argument("shape_name: unknown shape");
}

inline Shape shape_from_name(const std::string& name) {
    if (name == "sphere") return Shape::sphere;
    if (name == "cylinder") return Shape::cylinder;
    if (name == "box") return Shape::box;
    if (name == "capsule") return Shape::capsule;
    throw std::invalid_argument("unknown shape: " + name);
}

/**
 * A solid primitive with uniform attenuation.
 *
 * cylinder/capsule use `axis` (normalized on validate) and `half_length`;
 * box uses `half_extents`; sphere/cylinder/capsule use `radius`.
 * Containment of a point is strict (boundary excluded).
 */
struct Primitive {
    Shape shape = Shape::sphere;
    std::array<double, 3> center{0, 0, 0};
    std::array<double, 3> axis{0, 0, 1};
    double half_length = 0;
    double radius = 0;
    std::array<double, 3> half_extents{0, 0, 0};
    double attenuation = 0;  // mm^-1
    bool is_metal = false;

    void validate() const {
        if (attenuation < 0)
            throw std::invalid_argument("Primitive: attenuation must be >= 0");
        switch (shape) {
            case Shape::sphere:
                if (!(radius > 0))
                    throw std::invalid_argument("Primitive: sphere radius must be > 0");
                break;
            case Shape::cylinder:
            case Shape::capsule: {
                if (!(radius > 0) || !(half_length > 0))
                    throw std::invalid_argument(
                        "Primitive: cylinder/capsule need radius > 0 and "
                        "half_length > 0");
                const double n2 =
                    axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2];
                if (!(n2 > 0))
                    throw std::invalid_argument("Primitive: axis must be nonzero");
                break;
            }
            case Shape::box:
                if (!(half_extents[0] > 0 && half_extents[1] > 0 &&
                      half_extents[2] > 0))
                    throw std::invalid_argument(
                        "Primitive: box half_extents must be > 0");
                break;
        }
    }

    bool contains(const std::array<double, 3>& p) const {
        const double wx = p[0] - center[0];
        const double wy = p[1] - center[1];
        const double wz = p[2] - center[2];
        switch (shape) {
            case Shape::sphere:
                return wx * wx + wy * wy + wz * wz < radius * radius;
            case Shape::box:
                return std::abs(wx) < half_extents[0] &&
                       std::abs(wy) < half_extents[1] &&
                       std::abs(wz) < half_extents[2];
            case Shape::cylinder:
            case Shape::capsule: {
                const double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] +
                                            axis[2] * axis[2]);
                const double ax = axis[0] / an, ay = axis[1] / an, az = axis[2] / an;
                double h = wx * ax + wy * ay + wz * az;
                if (shape == Shape::cylinder) {
                    if (std::abs(h) >= half_length) return false;
                } else {
                    h = std::clamp(h, -half_length, half_length);
                }
                const double lx = wx - h * ax;
                const double ly = wy - h * ay;
                const double lz = wz - h * az;
                return lx * lx + ly * ly + lz * lz < radius * radius;
            }
        }
        return false;
    }

    static Primitive make_sphere(std::array<double, 3> center, double radius,
                                 double mu, bool metal) {
        Primitive p;
        p.shape = Shape::sphere;
        p.center = center;
        p.radius = radius;
        p.attenuation = mu;
        p.is_metal = metal;
        return p;
    }
    static Primitive make_cylinder(std::array<double, 3> center,
                                   std::array<double, 3> axis, double radius,
                                   double half_length, double mu, bool metal) {
        Primitive p;
        p.shape = Shape::cylinder;
        p.center = center;
        p.axis = axis;
        p.radius = radius;
        p.half_length = half_length;
        p.attenuation = mu;
        p.is_metal = metal;
        return p;
    }
    static Primitive make_capsule(std::array<double, 3> center,
                                  std::array<double, 3> axis, double radius,
                                  double half_length, double mu, bool metal) {
        Primitive p = make_cylinder(center, axis, radius, half_length, mu, metal);
        p.shape = Shape::capsule;
        return p;
    }
    static Primitive make_box(std::array<double, 3> center,
                              std::array<double, 3> half_extents, double mu,
                              bool metal) {
        Primitive p;
        p.shape = Shape::box;
        p.center = center;
        p.half_extents = half_extents;
        p.attenuation = mu;
        p.is_metal = metal;
        return p;
    }
};

/// Ordered list of primitives over a uniform background; later primitives
/// overwrite earlier ones where they overlap.
struct Scene {
    std::vector<Primitive> primitives;
    double background_attenuation = 0;

    void validate() const {
        if (background_attenuation < 0)
            throw std::invalid_argument("Scene: background_attenuation must be >= 0");
        for (const auto& p : primitives) p.validate();
    }
};

// Center-sampled voxelization: each voxel takes the attenuation of the last
// primitive containing its center, else the background.
inline Volume<float> voxelize(const Scene& scene, const VoxelGrid& grid) {
    scene.validate();
    grid.validate();
    Volume<float> out(grid, float(scene.background_attenuation));
    const std::size_t slab = std::size_t(grid.nx) * grid.ny;
    parallel_for(std::size_t(grid.nz), [&](std::size_t iz) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int ix = 0; ix < grid.nx; ++ix) {
                const auto p = grid.voxel_center(ix, iy, int(iz));
                for (auto it = scene.primitives.rbegin();
                     it != scene.primitives.rend(); ++it) {
                    if (it->contains(p)) {
                        out.data[iz * slab + std::size_t(iy) * grid.nx + ix] =
                            float(it->attenuation);
                        break;
                    }
                }
            }
        }
    });
    return out;
}

// Splits a scene into its paired acquisitions: the original, and a copy with
// every metal primitive removed.
inline std::pair<Scene, Scene> split_metal(const Scene& scene) {
    Scene without = scene;
    without.primitives.clear();
    for (const auto& p : scene.primitives)
        if (!p.is_metal) without.primitives.push_back(p);
    return {scene, without};
}

// Default tissue/bone/metal attenuations (mm^-1). Metal is 10x bone so that
// metal pixels separate cleanly in the line-integral domain.
inline constexpr double mu_tissue = 0.02;
inline constexpr double mu_bone = 0.05;
inline constexpr double mu_metal = 0.5;

/**
 * Named scene catalog used by the test and pipeline defaults, scaled to a
 * diagnostic FOV of radius `fov_radius` (mm, half-extent of the diagnostic
 * grid) inside an extended grid of radius `cc_radius`:
 *
 *  - "in_fov":     one solid implant embedded in bone, fully inside the FOV
 *  - "out_of_fov": an implant centered outside the FOV but inside the
 *                  extended grid
 *  - "fragments":  several small metal fragments in tissue and bone
 */
inline std::map<std::string, Scene> standard_phantoms(double fov_radius = 32.0,
                                                      double cc_radius = 48.0) {
    if (!(fov_radius > 0) || !(cc_radius > fov_radius))
        throw std::invalid_argument(
            "standard_phantoms: need cc_radius > fov_radius > 0");
    const double R = fov_radius;

    const auto tissue_body =
        Primitive::make_sphere({0, 0, 0}, 0.875 * R, mu_tissue, false);
    const auto bone_shaft = Primitive::make_cylinder(
        {-0.19 * R, 0, 0}, {0, 0, 1}, 0.28 * R, 0.75 * R, mu_bone, false);

    std::map<std::string, Scene> catalog;

    {
        Scene s;
        s.primitives = {tissue_body, bone_shaft,
                        Primitive::make_sphere({0.16 * R, 0.06 * R, 0}, 0.34 * R,
                                               mu_metal, true)};
        catalog["in_fov"] = s;
    }
    {
        const double metal_r = 0.25 * R;
        const double metal_cx = 1.125 * R;
        if (metal_cx + metal_r > cc_radius)
            throw std::invalid_argument(
                "standard_phantoms: cc_radius too small for out_of_fov scene");
        Scene s;
        s.primitives = {
            tissue_body,
            Primitive::make_capsule({0.56 * R, 0, 0}, {1, 0, 0}, 0.375 * R,
                                    0.56 * R, mu_tissue, false),
            bone_shaft,
            Primitive::make_sphere({metal_cx, 0, 0}, metal_r, mu_metal, true)};
        catalog["out_of_fov"] = s;
    }
    {
        Scene s;
        s.primitives = {
            tissue_body, bone_shaft,
            Primitive::make_sphere({0.31 * R, 0.25 * R, 0.19 * R}, 0.14 * R,
                                   mu_metal, true),
            Primitive::make_sphere({-0.19 * R, -0.03 * R, -0.44 * R}, 0.11 * R,
                                   mu_metal, true),
            Primitive::make_sphere({0.06 * R, -0.38 * R, 0.31 * R}, 0.125 * R,
                                   mu_metal, true),
            Primitive::make_sphere({-0.44 * R, 0.31 * R, 0.13 * R}, 0.1 * R,
                                   mu_metal, true)};
        catalog["fragments"] = s;
    }
    return catalog;
}

}  // namespace mcc
