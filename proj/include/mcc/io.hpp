#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mcc/geometry.hpp"
#include "mcc/phantom.hpp"
#include "mcc/segsim.hpp"
#include "mcc/types.hpp"

namespace mcc {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!j.is_object())
        throw std::invalid_argument(context + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument(context + ": unknown key '" + item.key() +
                                        "'");
    }
}

inline const json& require(const json& j, const char* key,
                           const std::string& context) {
    auto it = j.find(key);
    if (it == j.end())
        throw std::invalid_argument(context + ": missing key '" + key + "'");
    return *it;
}

template <typename T, std::size_t N>
std::array<T, N> to_fixed_array(const json& j, const std::string& context) {
    if (!j.is_array() || j.size() != N)
        throw std::invalid_argument(context + ": expected an array of size " +
                                    std::to_string(N));
    std::array<T, N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = j[i].get<T>();
    return out;
}

}  // namespace detail

// ---- geometry ----

inline void to_json(json& j, const ProjectionGeometry& g) {
    j = json{{"source_axis_distance", g.source_axis_distance},
             {"source_detector_distance", g.source_detector_distance},
             {"detector_cols", g.detector_cols},
             {"detector_rows", g.detector_rows},
             {"pixel_pitch", g.pixel_pitch},
             {"n_views", g.n_views},
             {"scan_arc", g.scan_arc},
             {"start_angle", g.start_angle}};
}

inline void from_json(const json& j, ProjectionGeometry& g) {
    const std::string ctx = "ProjectionGeometry";
    detail::check_keys(j,
                       {"source_axis_distance", "source_detector_distance",
                        "detector_cols", "detector_rows", "pixel_pitch", "n_views",
                        "scan_arc", "start_angle"},
                       ctx);
    g.source_axis_distance = detail::require(j, "source_axis_distance", ctx).get<double>();
    g.source_detector_distance =
        detail::require(j, "source_detector_distance", ctx).get<double>();
    g.detector_cols = detail::require(j, "detector_cols", ctx).get<int>();
    g.detector_rows = detail::require(j, "detector_rows", ctx).get<int>();
    g.pixel_pitch = detail::require(j, "pixel_pitch", ctx).get<double>();
    g.n_views = detail::require(j, "n_views", ctx).get<int>();
    g.scan_arc = detail::require(j, "scan_arc", ctx).get<double>();
    g.start_angle = detail::require(j, "start_angle", ctx).get<double>();
    g.validate();
}

inline void to_json(json& j, const VoxelGrid& g) {
    j = json{{"nx", g.nx},
             {"ny", g.ny},
             {"nz", g.nz},
             {"voxel_size", g.voxel_size},
             {"center_offset", g.center_offset}};
}

inline void from_json(const json& j, VoxelGrid& g) {
    const std::string ctx = "VoxelGrid";
    detail::check_keys(j, {"nx", "ny", "nz", "voxel_size", "center_offset"}, ctx);
    g.nx = detail::require(j, "nx", ctx).get<int>();
    g.ny = detail::require(j, "ny", ctx).get<int>();
    g.nz = detail::require(j, "nz", ctx).get<int>();
    g.voxel_size = detail::require(j, "voxel_size", ctx).get<double>();
    g.center_offset = detail::to_fixed_array<double, 3>(
        detail::require(j, "center_offset", ctx), ctx + ".center_offset");
    g.validate();
}

// ---- scenes ----

inline void to_json(json& j, const Primitive& p) {
    j = json{{"shape", shape_name(p.shape)},
             {"center", p.center},
             {"attenuation", p.attenuation},
             {"is_metal", p.is_metal}};
    switch (p.shape) {
        case Shape::sphere:
            j["radius"] = p.radius;
            break;
        case Shape::cylinder:
        case Shape::capsule:
            j["radius"] = p.radius;
            j["axis"] = p.axis;
            j["half_length"] = p.half_length;
            break;
        case Shape::box:
            j["half_extents"] = p.half_extents;
            break;
    }
}

inline void from_json(const json& j, Primitive& p) {
    const std::string ctx = "Primitive";
    p = Primitive{};
    p.shape = shape_from_name(detail::require(j, "shape", ctx).get<std::string>());
    switch (p.shape) {
        case Shape::sphere:
            detail::check_keys(
                j, {"shape", "center", "radius", "attenuation", "is_metal"}, ctx);
            p.radius = detail::require(j, "radius", ctx).get<double>();
            break;
        case Shape::cylinder:
        case Shape::capsule:
            detail::check_keys(j,
                               {"shape", "center", "axis", "half_length", "radius",
                                "attenuation", "is_metal"},
                               ctx);
            p.radius = detail::require(j, "radius", ctx).get<double>();
            p.axis = detail::to_fixed_array<double, 3>(
                detail::require(j, "axis", ctx), ctx + ".axis");
            p.half_length = detail::require(j, "half_length", ctx).get<double>();
            break;
        case Shape::box:
            detail::check_keys(
                j, {"shape", "center", "half_extents", "attenuation", "is_metal"},
                ctx);
            p.half_extents = detail::to_fixed_array<double, 3>(
                detail::require(j, "half_extents", ctx), ctx + ".half_extents");
            break;
    }
    p.center = detail::to_fixed_array<double, 3>(detail::require(j, "center", ctx),
                                                 ctx + ".center");
    p.attenuation = detail::require(j, "attenuation", ctx).get<double>();
    p.is_metal = detail::require(j, "is_metal", ctx).get<bool>();
    p.validate();
}

inline void to_json(json& j, const Scene& s) {
    j = json{{"background_attenuation", s.background_attenuation},
             {"primitives", s.primitives}};
}

inline void from_json(const json& j, Scene& s) {
    const std::string ctx = "Scene";
    detail::check_keys(j, {"background_attenuation", "primitives"}, ctx);
    s.background_attenuation =
        detail::require(j, "background_attenuation", ctx).get<double>();
    s.primitives =
        detail::require(j, "primitives", ctx).get<std::vector<Primitive>>();
    s.validate();
}

// ---- segmenter configuration ----

inline void to_json(json& j, const PerturbationConfig& c) {
    j = json{{"fp_blob_rate", c.fp_blob_rate},
             {"fp_blob_radius", c.fp_blob_radius},
             {"fp_confidence", c.fp_confidence},
             {"fp_persistence", c.fp_persistence},
             {"fn_dropout_rate", c.fn_dropout_rate},
             {"fn_erosion_radius", c.fn_erosion_radius},
             {"gt_confidence", c.gt_confidence},
             {"seed", c.seed}};
}

inline void from_json(const json& j, PerturbationConfig& c) {
    const std::string ctx = "PerturbationConfig";
    detail::check_keys(j,
                       {"fp_blob_rate", "fp_blob_radius", "fp_confidence",
                        "fp_persistence", "fn_dropout_rate", "fn_erosion_radius",
                        "gt_confidence", "seed"},
                       ctx);
    if (j.contains("fp_blob_rate")) c.fp_blob_rate = j["fp_blob_rate"].get<double>();
    if (j.contains("fp_blob_radius"))
        c.fp_blob_radius = detail::to_fixed_array<double, 2>(j["fp_blob_radius"],
                                                             ctx + ".fp_blob_radius");
    if (j.contains("fp_confidence"))
        c.fp_confidence = detail::to_fixed_array<double, 2>(j["fp_confidence"],
                                                            ctx + ".fp_confidence");
    if (j.contains("fp_persistence"))
        c.fp_persistence = detail::to_fixed_array<int, 2>(j["fp_persistence"],
                                                          ctx + ".fp_persistence");
    if (j.contains("fn_dropout_rate"))
        c.fn_dropout_rate = j["fn_dropout_rate"].get<double>();
    if (j.contains("fn_erosion_radius"))
        c.fn_erosion_radius = j["fn_erosion_radius"].get<double>();
    if (j.contains("gt_confidence"))
        c.gt_confidence = detail::to_fixed_array<double, 2>(j["gt_confidence"],
                                                            ctx + ".gt_confidence");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    c.validate();
}

inline void to_json(json& j, const PatchPlan& p) {
    j = json{{"patch_size", p.patch_size}, {"stride", p.stride}};
}

inline void from_json(const json& j, PatchPlan& p) {
    detail::check_keys(j, {"patch_size", "stride"}, "PatchPlan");
    if (j.contains("patch_size")) p.patch_size = j["patch_size"].get<int>();
    if (j.contains("stride")) p.stride = j["stride"].get<int>();
}

// ---- raw array files with JSON sidecar ----

enum class Dtype { f32, u8 };

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "u8"; }
inline std::size_t dtype_size(Dtype d) { return d == Dtype::f32 ? 4 : 1; }
inline Dtype dtype_from_name(const std::string& s) {
    if (s == "f32") return Dtype::f32;
    if (s == "u8") return Dtype::u8;
    throw std::invalid_argument("unknown dtype: " + s);
}

inline const std::vector<std::string>& array_semantics() {
    static const std::vector<std::string> s = {
        "attenuation", "line_integral", "soft_mask", "mask", "consistency",
        "visits"};
    return s;
}

/**
 * Sidecar header of a raw little-endian array file. The payload lives at
 * `path`, the header at `path + ".json"`. Shapes are C-order, slowest axis
 * first (view/z, then row/y, then col/x). Stacks carry pixel_pitch and the
 * full geometry; volumes carry voxel_size and the grid.
 */
struct ArrayHeader {
    Dtype dtype = Dtype::f32;
    std::vector<std::int64_t> shape;
    std::string semantic;
    std::optional<double> pixel_pitch;
    std::optional<ProjectionGeometry> geometry;
    std::optional<double> voxel_size;
    std::optional<VoxelGrid> grid;

    std::size_t payload_bytes() const {
        std::size_t n = dtype_size(dtype);
        for (auto s : shape) n *= std::size_t(s);
        return n;
    }
};

inline void to_json(json& j, const ArrayHeader& h) {
    j = json{{"dtype", dtype_name(h.dtype)},
             {"shape", h.shape},
             {"endianness", "little"},
             {"semantic", h.semantic}};
    if (h.pixel_pitch) j["pixel_pitch"] = *h.pixel_pitch;
    if (h.geometry) j["geometry"] = *h.geometry;
    if (h.voxel_size) j["voxel_size"] = *h.voxel_size;
    if (h.grid) j["grid"] = *h.grid;
}

inline void from_json(const json& j, ArrayHeader& h) {
    const std::string ctx = "ArrayHeader";
    detail::check_keys(j,
                       {"dtype", "shape", "endianness", "semantic", "pixel_pitch",
                        "geometry", "voxel_size", "grid"},
                       ctx);
    h = ArrayHeader{};
    h.dtype = dtype_from_name(detail::require(j, "dtype", ctx).get<std::string>());
    h.shape =
        detail::require(j, "shape", ctx).get<std::vector<std::int64_t>>();
    for (auto s : h.shape)
        if (s < 1) throw std::invalid_argument(ctx + ": shape entries must be >= 1");
    if (detail::require(j, "endianness", ctx).get<std::string>() != "little")
        throw std::invalid_argument(ctx + ": only little-endian payloads supported");
    h.semantic = detail::require(j, "semantic", ctx).get<std::string>();
    bool known = false;
    for (const auto& s : array_semantics()) known = known || s == h.semantic;
    if (!known) throw std::invalid_argument(ctx + ": unknown semantic '" +
                                            h.semantic + "'");
    if (j.contains("pixel_pitch")) h.pixel_pitch = j["pixel_pitch"].get<double>();
    if (j.contains("geometry"))
        h.geometry = j["geometry"].get<ProjectionGeometry>();
    if (j.contains("voxel_size")) h.voxel_size = j["voxel_size"].get<double>();
    if (j.contains("grid")) h.grid = j["grid"].get<VoxelGrid>();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(text.data(), std::streamsize(text.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return text;
}

inline void write_array(const std::filesystem::path& path, const ArrayHeader& h,
                        const void* bytes, std::size_t n_bytes) {
    if (n_bytes != h.payload_bytes())
        throw std::invalid_argument("write_array: payload length " +
                                    std::to_string(n_bytes) +
                                    " does not match header shape (" +
                                    std::to_string(h.payload_bytes()) + " bytes)");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(static_cast<const char*>(bytes), std::streamsize(n_bytes));
    if (!f) throw std::runtime_error("write failed: " + path.string());
    write_text_file(path.string() + ".json", json(h).dump(2) + "\n");
}

inline std::pair<ArrayHeader, std::vector<char>> read_array(
    const std::filesystem::path& path) {
    const ArrayHeader h =
        json::parse(read_text_file(path.string() + ".json")).get<ArrayHeader>();
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    const std::size_t actual = std::size_t(f.tellg());
    const std::size_t expected = h.payload_bytes();
    if (actual != expected)
        throw std::runtime_error(
            path.string() + ": truncated payload: expected " +
            std::to_string(expected) + " bytes, found " + std::to_string(actual) +
            " (payload ends at byte offset " + std::to_string(actual) + ")");
    std::vector<char> bytes(actual);
    f.seekg(0);
    f.read(bytes.data(), std::streamsize(actual));
    if (!f) throw std::runtime_error("read failed: " + path.string());
    return {h, std::move(bytes)};
}

// ---- typed array wrappers ----

template <typename T>
Dtype dtype_of() {
    if constexpr (std::is_same_v<T, float>) return Dtype::f32;
    else return Dtype::u8;
}

template <typename T>
void write_stack(const std::filesystem::path& path, const Stack<T>& stack,
                 const std::string& semantic) {
    stack.validate();
    ArrayHeader h;
    h.dtype = dtype_of<T>();
    h.shape = {stack.geom.n_views, stack.geom.detector_rows,
               stack.geom.detector_cols};
    h.semantic = semantic;
    h.pixel_pitch = stack.geom.pixel_pitch;
    h.geometry = stack.geom;
    write_array(path, h, stack.data.data(), stack.data.size() * sizeof(T));
}

template <typename T>
Stack<T> read_stack(const std::filesystem::path& path) {
    auto [h, bytes] = read_array(path);
    if (h.dtype != dtype_of<T>())
        throw std::runtime_error(path.string() + ": dtype mismatch: file has " +
                                 dtype_name(h.dtype));
    if (!h.geometry)
        throw std::runtime_error(path.string() + ": stack sidecar lacks geometry");
    Stack<T> stack(*h.geometry);
    if (h.shape != std::vector<std::int64_t>{stack.geom.n_views,
                                             stack.geom.detector_rows,
                                             stack.geom.detector_cols})
        throw std::runtime_error(path.string() +
                                 ": shape does not match geometry");
    std::memcpy(stack.data.data(), bytes.data(), bytes.size());
    return stack;
}

template <typename T>
void write_volume(const std::filesystem::path& path, const Volume<T>& vol,
                  const std::string& semantic) {
    vol.validate();
    ArrayHeader h;
    h.dtype = dtype_of<T>();
    h.shape = {vol.grid.nz, vol.grid.ny, vol.grid.nx};
    h.semantic = semantic;
    h.voxel_size = vol.grid.voxel_size;
    h.grid = vol.grid;
    write_array(path, h, vol.data.data(), vol.data.size() * sizeof(T));
}

template <typename T>
Volume<T> read_volume(const std::filesystem::path& path) {
    auto [h, bytes] = read_array(path);
    if (h.dtype != dtype_of<T>())
        throw std::runtime_error(path.string() + ": dtype mismatch: file has " +
                                 dtype_name(h.dtype));
    if (!h.grid)
        throw std::runtime_error(path.string() + ": volume sidecar lacks grid");
    Volume<T> vol(*h.grid);
    if (h.shape !=
        std::vector<std::int64_t>{vol.grid.nz, vol.grid.ny, vol.grid.nx})
        throw std::runtime_error(path.string() + ": shape does not match grid");
    std::memcpy(vol.data.data(), bytes.data(), bytes.size());
    return vol;
}

// ---- PGM export ----

// 8-bit binary PGM (P5), min-max scaled; a constant image maps to all zeros.
inline void export_pgm(const Image2D<float>& image,
                       const std::filesystem::path& path) {
    if (image.rows < 1 || image.cols < 1 || image.data.empty())
        throw std::invalid_argument("export_pgm: zero-sized image");
    float lo = image.data[0], hi = image.data[0];
    for (float x : image.data) {
        if (!std::isfinite(x))
            throw std::invalid_argument("export_pgm: non-finite pixel");
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double scale = hi > lo ? 255.0 / (double(hi) - double(lo)) : 0.0;
    std::string out = "P5\n" + std::to_string(image.cols) + " " +
                      std::to_string(image.rows) + "\n255\n";
    out.reserve(out.size() + image.data.size());
    for (float x : image.data)
        out.push_back(char(static_cast<unsigned char>(
            std::lround((double(x) - double(lo)) * scale))));
    write_text_file(path, out);
}

template <typename T>
Image2D<float> stack_view_image(const Stack<T>& stack, int view) {
    Image2D<float> img(stack.geom.detector_rows, stack.geom.detector_cols);
    const T* src = stack.view_data(view);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = float(src[i]);
    return img;
}

// ---- hashing ----

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[std::size_t(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return s;
}

}  // namespace mcc
