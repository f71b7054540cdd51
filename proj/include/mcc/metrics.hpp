#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcc/consistency.hpp"
#include "mcc/geometry.hpp"
#include "mcc/segsim.hpp"

namespace mcc {

struct Confusion {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

struct ViewMetrics {
    double iou = 0;
    double dice = 0;
    double precision = 0;
    double recall = 0;
};

struct Aggregate {
    double mean = 0;
    double std_dev = 0;  // population
};

struct MetricsReport {
    std::vector<ViewMetrics> per_view;
    Aggregate iou, dice, precision, recall;
    std::optional<double> auc;
};

namespace detail {

inline void check_same_shape(const ProjectionGeometry& a,
                             const ProjectionGeometry& b, const char* what) {
    if (a.n_views != b.n_views || a.detector_rows != b.detector_rows ||
        a.detector_cols != b.detector_cols)
        throw std::invalid_argument(std::string(what) + ": stack shapes differ");
}

inline Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    double sum = 0;
    for (double x : xs) sum += x;
    a.mean = sum / double(xs.size());
    double var = 0;
    for (double x : xs) var += (x - a.mean) * (x - a.mean);
    a.std_dev = std::sqrt(var / double(xs.size()));
    return a;
}

}  // namespace detail

// Exact pixel confusion counts of one view.
inline Confusion confusion_view(const MaskStack& pred, const MaskStack& gt,
                                int view) {
    Confusion c;
    const std::uint8_t* p = pred.view_data(view);
    const std::uint8_t* g = gt.view_data(view);
    const std::size_t n = pred.geom.pixels_per_view();
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] && g[i]) ++c.tp;
        else if (p[i] && !g[i]) ++c.fp;
        else if (!p[i] && g[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Per-view confusion counts plus the stack total (last element).
inline std::vector<Confusion> confusion(const MaskStack& pred,
                                        const MaskStack& gt) {
    pred.validate();
    gt.validate();
    detail::check_same_shape(pred.geom, gt.geom, "confusion");
    std::vector<Confusion> out;
    out.reserve(pred.geom.n_views + 1);
    Confusion total;
    for (int v = 0; v < pred.geom.n_views; ++v) {
        const Confusion c = confusion_view(pred, gt, v);
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
        total.tn += c.tn;
        out.push_back(c);
    }
    out.push_back(total);
    return out;
}

// Metrics of one confusion record. A view where both prediction and ground
// truth are empty scores 1 on all four metrics; denominator-zero cases with a
// nonempty counterpart fall out of the same rule (recalling zero ground-truth
// pixels is a full recall).
inline ViewMetrics view_metrics(const Confusion& c) {
    ViewMetrics m;
    m.iou = (c.tp + c.fp + c.fn) == 0 ? 1.0
                                      : double(c.tp) / double(c.tp + c.fp + c.fn);
    m.dice = (2 * c.tp + c.fp + c.fn) == 0
                 ? 1.0
                 : double(2 * c.tp) / double(2 * c.tp + c.fp + c.fn);
    m.precision = (c.tp + c.fp) == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fp);
    m.recall = (c.tp + c.fn) == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fn);
    return m;
}

// Per-view IoU/Dice/Precision/Recall with mean and population std over views.
// skip_empty_views drops views whose prediction and ground truth are both
// empty from the aggregate.
inline MetricsReport mask_metrics(const MaskStack& pred, const MaskStack& gt,
                                  bool skip_empty_views = false) {
    const auto conf = confusion(pred, gt);
    MetricsReport report;
    std::vector<double> iou, dice, prec, rec;
    for (int v = 0; v < pred.geom.n_views; ++v) {
        const Confusion& c = conf[v];
        if (skip_empty_views && c.tp + c.fp + c.fn == 0) continue;
        const ViewMetrics m = view_metrics(c);
        report.per_view.push_back(m);
        iou.push_back(m.iou);
        dice.push_back(m.dice);
        prec.push_back(m.precision);
        rec.push_back(m.recall);
    }
    report.iou = detail::aggregate(iou);
    report.dice = detail::aggregate(dice);
    report.precision = detail::aggregate(prec);
    report.recall = detail::aggregate(rec);
    return report;
}

// Scan-level alternative to the per-view default: one metric set computed
// from the pooled confusion counts of the whole stack.
inline ViewMetrics scan_metrics(const MaskStack& pred, const MaskStack& gt) {
    const auto conf = confusion(pred, gt);
    return view_metrics(conf.back());
}

// Area under the pixel-wise ROC curve over the pooled stack, by descending
// sweep over unique confidence values with trapezoidal integration. Ties
// count one half, matching the normalized Mann-Whitney U statistic.
inline double roc_auc(const SoftMaskStack& soft, const MaskStack& gt) {
    soft.validate();
    gt.validate();
    detail::check_same_shape(soft.geom, gt.geom, "roc_auc");
    const std::size_t n = soft.data.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return soft.data[a] > soft.data[b];
    });

    std::int64_t pos_total = 0;
    for (std::size_t i = 0; i < n; ++i) pos_total += gt.data[i] ? 1 : 0;
    const std::int64_t neg_total = std::int64_t(n) - pos_total;
    if (pos_total == 0 || neg_total == 0)
        throw std::invalid_argument(
            "roc_auc: ground truth has a single class, AUC undefined");

    // Sweep thresholds between groups of equal confidence; each group moves
    // the ROC point by (d_fp, d_tp) and the trapezoid rule halves the ties.
    double area2 = 0;  // twice the area, in raw counts
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::int64_t d_tp = 0, d_fp = 0;
        while (j < n && soft.data[order[j]] == soft.data[order[i]]) {
            (gt.data[order[j]] ? d_tp : d_fp) += 1;
            ++j;
        }
        area2 += double(d_fp) * double(2 * tp + d_tp);
        tp += d_tp;
        fp += d_fp;
        i = j;
    }
    return area2 / (2.0 * double(pos_total) * double(neg_total));
}

struct ExperimentRow {
    double threshold = 0;
    bool cc = false;
    MetricsReport report;
};

// The binarization-threshold x consistency-check grid: each threshold is
// evaluated raw and after the consistency check.
inline std::vector<ExperimentRow> experiment_grid(const SoftMaskStack& soft,
                                                  const MaskStack& gt,
                                                  const std::vector<double>& thresholds,
                                                  const CCConfig& ccfg) {
    soft.validate();
    gt.validate();
    detail::check_same_shape(soft.geom, gt.geom, "experiment_grid");
    ccfg.validate();
    std::vector<ExperimentRow> rows;
    rows.reserve(2 * thresholds.size());
    for (double threshold : thresholds) {
        const MaskStack binarized = binarize(soft, threshold);
        rows.push_back({threshold, false, mask_metrics(binarized, gt)});
        CCConfig cfg = ccfg;
        cfg.keep_intermediates = false;
        const CCResult cc = consistency_check(binarized, cfg);
        rows.push_back({threshold, true, mask_metrics(cc.consistent_masks, gt)});
    }
    return rows;
}

}  // namespace mcc
