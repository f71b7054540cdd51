#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mcc/geometry.hpp"
#include "mcc/parallel.hpp"
#include "mcc/rng.hpp"
#include "mcc/types.hpp"

namespace mcc {

// Converts measured intensities to line integrals: ln(i0 / I) per pixel,
// with I floored at 1e-12 * i0.
inline ProjectionStack lambert_beer(const ProjectionStack& intensities,
                                    double i0) {
    intensities.validate();
    if (!(i0 > 0)) throw std::invalid_argument("lambert_beer: i0 must be > 0");
    const double floor_i = 1e-12 * i0;
    ProjectionStack out(intensities.geom, 0.0f);
    parallel_for(out.data.size(), [&](std::size_t i) {
        const double I = std::max(double(intensities.data[i]), floor_i);
        out.data[i] = float(std::log(i0 / I));
    });
    return out;
}

// Ground-truth masks by subtraction of the paired metal-free projection:
// a pixel is metal iff (with - without) > delta.
inline MaskStack gt_masks(const ProjectionStack& with_metal,
                          const ProjectionStack& without_metal, double delta) {
    with_metal.validate();
    without_metal.validate();
    if (!(with_metal.geom == without_metal.geom))
        throw std::invalid_argument("gt_masks: projection geometries differ");
    if (!(delta > 0)) throw std::invalid_argument("gt_masks: delta must be > 0");
    MaskStack out(with_metal.geom, 0);
    parallel_for(out.data.size(), [&](std::size_t i) {
        out.data[i] =
            double(with_metal.data[i]) - double(without_metal.data[i]) > delta
                ? 1
                : 0;
    });
    return out;
}

/**
 * Error model for the simulated segmenter: confidences for true metal drawn
 * from gt_confidence, transient false-positive blobs, and per-view erosion
 * dropouts. Fully deterministic given `seed`; every view draws from its own
 * (seed, view) substream.
 */
struct PerturbationConfig {
    double fp_blob_rate = 0.0;                 // expected blob births per view
    std::array<double, 2> fp_blob_radius{2, 4};   // pixels
    std::array<double, 2> fp_confidence{0.5, 1};  // in [0,1]
    std::array<int, 2> fp_persistence{1, 3};      // consecutive views per blob
    double fn_dropout_rate = 0.0;              // probability a view is eroded
    double fn_erosion_radius = 0.0;            // pixels
    std::array<double, 2> gt_confidence{1, 1};    // in [0,1]
    std::uint64_t seed = 0;

    void validate() const {
        auto check01 = [](double x, const char* what) {
            if (!(x >= 0 && x <= 1))
                throw std::invalid_argument(std::string("PerturbationConfig: ") +
                                            what + " must be in [0,1]");
        };
        auto check_range = [](const std::array<double, 2>& r, const char* what) {
            if (!(r[0] <= r[1]) || r[0] < 0)
                throw std::invalid_argument(std::string("PerturbationConfig: ") +
                                            what + " needs 0 <= min <= max");
        };
        if (fp_blob_rate < 0)
            throw std::invalid_argument("PerturbationConfig: fp_blob_rate < 0");
        check01(fn_dropout_rate, "fn_dropout_rate");
        check01(fp_confidence[0], "fp_confidence");
        check01(fp_confidence[1], "fp_confidence");
        check01(gt_confidence[0], "gt_confidence");
        check01(gt_confidence[1], "gt_confidence");
        check_range(fp_blob_radius, "fp_blob_radius");
        check_range(fp_confidence, "fp_confidence");
        check_range(gt_confidence, "gt_confidence");
        if (fn_erosion_radius < 0)
            throw std::invalid_argument("PerturbationConfig: fn_erosion_radius < 0");
        if (fp_persistence[0] < 1 || fp_persistence[0] > fp_persistence[1])
            throw std::invalid_argument(
                "PerturbationConfig: fp_persistence needs 1 <= min <= max");
    }
};

/// A false-positive blob born at one view, fixed in detector coordinates for
/// `persistence` consecutive views.
struct FpBlob {
    double u = 0, v = 0;  // center, pixels
    double radius = 0;
    double confidence = 0;
    int persistence = 1;
};

// Blob births of one view, regenerated from the (seed, view) substream.
inline std::vector<FpBlob> fp_blobs_born_at(const PerturbationConfig& cfg,
                                            int view, int rows, int cols) {
    Rng rng = Rng::stream(cfg.seed, std::uint64_t(view), 1);
    const int count = rng.poisson(cfg.fp_blob_rate);
    std::vector<FpBlob> blobs(count);
    for (auto& b : blobs) {
        b.u = rng.uniform(0.0, double(cols));
        b.v = rng.uniform(0.0, double(rows));
        b.radius = rng.uniform(cfg.fp_blob_radius[0], cfg.fp_blob_radius[1]);
        b.confidence = rng.uniform(cfg.fp_confidence[0], cfg.fp_confidence[1]);
        b.persistence =
            rng.uniform_int(cfg.fp_persistence[0], cfg.fp_persistence[1]);
    }
    return blobs;
}

namespace detail {

// Binary erosion by a disk of the given radius; neighbors outside the image
// count as background.
inline void erode_disk(const std::uint8_t* in, std::uint8_t* out, int rows,
                       int cols, double radius) {
    std::vector<std::array<int, 2>> offsets;
    const int r_int = int(std::floor(radius));
    for (int dy = -r_int; dy <= r_int; ++dy)
        for (int dx = -r_int; dx <= r_int; ++dx)
            if (double(dy) * dy + double(dx) * dx <= radius * radius)
                offsets.push_back({dy, dx});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::uint8_t keep = 1;
            for (const auto& off : offsets) {
                const int rr = r + off[0], cc = c + off[1];
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols ||
                    !in[std::size_t(rr) * cols + cc]) {
                    keep = 0;
                    break;
                }
            }
            out[std::size_t(r) * cols + c] = keep && in[std::size_t(r) * cols + c];
        }
    }
}

inline void splat_blob(float* view, int rows, int cols, const FpBlob& b) {
    const int c_lo = std::max(0, int(std::floor(b.u - b.radius - 1)));
    const int c_hi = std::min(cols - 1, int(std::ceil(b.u + b.radius + 1)));
    const int r_lo = std::max(0, int(std::floor(b.v - b.radius - 1)));
    const int r_hi = std::min(rows - 1, int(std::ceil(b.v + b.radius + 1)));
    for (int r = r_lo; r <= r_hi; ++r) {
        for (int c = c_lo; c <= c_hi; ++c) {
            const double du = c + 0.5 - b.u;
            const double dv = r + 0.5 - b.v;
            if (du * du + dv * dv <= b.radius * b.radius) {
                float& px = view[std::size_t(r) * cols + c];
                px = std::max(px, float(b.confidence));
            }
        }
    }
}

}  // namespace detail

// Simulated network output: GT confidences with optional per-view erosion
// dropouts, plus transient false-positive blobs. A blob born at view b covers
// views b .. b+persistence-1 at the same detector location.
inline SoftMaskStack simulate_soft_masks(const MaskStack& gt,
                                         const PerturbationConfig& cfg) {
    gt.validate();
    cfg.validate();
    const ProjectionGeometry& geom = gt.geom;
    const int rows = geom.detector_rows, cols = geom.detector_cols;
    SoftMaskStack out(geom, 0.0f);
    parallel_for(std::size_t(geom.n_views), [&](std::size_t vi) {
        const int view = int(vi);
        Rng rng = Rng::stream(cfg.seed, std::uint64_t(view), 0);

        const std::uint8_t* gt_view = gt.view_data(view);
        std::vector<std::uint8_t> eroded;
        if (cfg.fn_dropout_rate > 0 && rng.bernoulli(cfg.fn_dropout_rate)) {
            eroded.resize(std::size_t(rows) * cols);
            detail::erode_disk(gt_view, eroded.data(), rows, cols,
                               cfg.fn_erosion_radius);
            gt_view = eroded.data();
        }

        float* ov = out.view_data(view);
        for (std::size_t i = 0; i < std::size_t(rows) * cols; ++i)
            if (gt_view[i])
                ov[i] = float(rng.uniform(cfg.gt_confidence[0], cfg.gt_confidence[1]));

        if (cfg.fp_blob_rate > 0) {
            const int window = cfg.fp_persistence[1];
            for (int b = std::max(0, view - window + 1); b <= view; ++b)
                for (const auto& blob : fp_blobs_born_at(cfg, b, rows, cols))
                    if (b + blob.persistence > view)
                        detail::splat_blob(ov, rows, cols, blob);
        }
    });
    return out;
}

// Thresholds confidences at threshold_percent (percent of full scale, strict
// comparison in f32 so stored confidences binarize the way they print).
inline MaskStack binarize(const SoftMaskStack& soft, double threshold_percent) {
    soft.validate();
    if (!(threshold_percent > 0 && threshold_percent < 100))
        throw std::invalid_argument("binarize: threshold must be in (0, 100)");
    const float cut = float(threshold_percent / 100.0);
    MaskStack out(soft.geom, 0);
    parallel_for(out.data.size(), [&](std::size_t i) {
        out.data[i] = soft.data[i] > cut ? 1 : 0;
    });
    return out;
}

/// Sliding-window layout: windows advance by `stride` and the final window of
/// each axis is clamped to the image edge, so every pixel is covered.
struct PatchPlan {
    int patch_size = 128;
    int stride = 32;

    void validate_for(int rows, int cols) const {
        if (stride < 1 || stride > patch_size)
            throw std::invalid_argument("PatchPlan: need 1 <= stride <= patch_size");
        if (patch_size > std::min(rows, cols))
            throw std::invalid_argument("PatchPlan: patch_size exceeds image");
    }
};

namespace detail {

inline std::vector<int> window_starts(int extent, int patch, int stride) {
    std::vector<int> starts;
    int x = 0;
    for (; x + patch <= extent; x += stride) starts.push_back(x);
    if (starts.back() != extent - patch) starts.push_back(extent - patch);
    return starts;
}

}  // namespace detail

// Applies the scorer to every window of the plan and sums overlapping
// outputs into an accumulator. The raw sum is returned unless
// normalize_coverage divides each pixel by its window count.
template <typename Scorer>
Image2D<float> stitch_patches(const Image2D<float>& image, Scorer&& scorer,
                              const PatchPlan& plan,
                              bool normalize_coverage = false) {
    plan.validate_for(image.rows, image.cols);
    const auto row_starts =
        detail::window_starts(image.rows, plan.patch_size, plan.stride);
    const auto col_starts =
        detail::window_starts(image.cols, plan.patch_size, plan.stride);

    Image2D<float> acc(image.rows, image.cols, 0.0f);
    Image2D<float> coverage;
    if (normalize_coverage) coverage = Image2D<float>(image.rows, image.cols, 0.0f);

    Image2D<float> patch(plan.patch_size, plan.patch_size, 0.0f);
    for (int r0 : row_starts) {
        for (int c0 : col_starts) {
            for (int r = 0; r < plan.patch_size; ++r)
                for (int c = 0; c < plan.patch_size; ++c)
                    patch.at(r, c) = image.at(r0 + r, c0 + c);
            Image2D<float> scores = scorer(patch);
            if (scores.rows != plan.patch_size || scores.cols != plan.patch_size)
                throw std::runtime_error(
                    "stitch_patches: scorer output shape mismatch");
            for (int r = 0; r < plan.patch_size; ++r)
                for (int c = 0; c < plan.patch_size; ++c) {
                    acc.at(r0 + r, c0 + c) += scores.at(r, c);
                    if (normalize_coverage) coverage.at(r0 + r, c0 + c) += 1.0f;
                }
        }
    }
    if (normalize_coverage)
        for (std::size_t i = 0; i < acc.data.size(); ++i)
            acc.data[i] /= coverage.data[i];
    return acc;
}

// Stand-in patch scorer: votes 1 for every patch pixel whose line-integral
// value exceeds the threshold.
inline auto reference_scorer(double threshold) {
    if (!(threshold > 0))
        throw std::invalid_argument("reference_scorer: threshold must be > 0");
    return [threshold](const Image2D<float>& patch) {
        Image2D<float> out(patch.rows, patch.cols, 0.0f);
        for (std::size_t i = 0; i < patch.data.size(); ++i)
            out.data[i] = patch.data[i] > threshold ? 1.0f : 0.0f;
        return out;
    };
}

// Full-stack sliding-window segmentation with the reference scorer; coverage
// normalization keeps the result a confidence in [0,1].
inline SoftMaskStack stitch_segment_stack(const ProjectionStack& proj,
                                          double threshold,
                                          const PatchPlan& plan) {
    proj.validate();
    auto scorer = reference_scorer(threshold);
    SoftMaskStack out(proj.geom, 0.0f);
    const int rows = proj.geom.detector_rows, cols = proj.geom.detector_cols;
    parallel_for(std::size_t(proj.geom.n_views), [&](std::size_t view) {
        Image2D<float> img(rows, cols);
        std::copy_n(proj.view_data(int(view)), img.data.size(), img.data.begin());
        Image2D<float> scores = stitch_patches(img, scorer, plan, true);
        std::copy_n(scores.data.begin(), scores.data.size(),
                    out.view_data(int(view)));
    });
    return out;
}

}  // namespace mcc
