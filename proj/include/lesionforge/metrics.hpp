#pragma once

// Voxel-wise and lesion-wise scoring of a predicted segmentation against a
// reference.
//
// Lesion-wise rules, applied after dropping components smaller than
// min_lesion_mm3 (exactly min_lesion_mm3 survives):
//   - a reference lesion L is detected when |L n pred| / |L| >= sens_overlap;
//   - a predicted lesion P is a true positive when |P n ref| / |P| >= ppv_overlap
//     and |P \ ref| / |P| <= ppv_outside.
// All comparisons are inclusive.
//
// Empty-case conventions: both masks empty gives dice = 1 and
// S_L = P_L = LesF1 = 1. S_L (P_L) is 1 when the reference (prediction) has
// no lesions. LesF1 = 0 when S_L + P_L = 0.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <string>
#include <vector>

#include "lesionforge/components.hpp"
#include "lesionforge/volume.hpp"

namespace lesionforge {

enum class SizeFilterSide { both, reference_only, prediction_only };

struct DetectionThresholds {
    double min_lesion_mm3 = 3.0;
    double sens_overlap = 0.10;
    double ppv_overlap = 0.65;
    double ppv_outside = 0.70;
    Connectivity connectivity = Connectivity::vertex;
    SizeFilterSide filter_side = SizeFilterSide::both;

    void validate() const {
        auto ratio = [](double r, const char* what) {
            if (!(r >= 0.0 && r <= 1.0)) throw ParameterError(std::string("thresholds: ") + what + " must lie in [0,1]");
        };
        ratio(sens_overlap, "sens_overlap");
        ratio(ppv_overlap, "ppv_overlap");
        ratio(ppv_outside, "ppv_outside");
        if (!(min_lesion_mm3 >= 0.0)) throw ParameterError("thresholds: min_lesion_mm3 must be >= 0");
    }
};

struct VoxelOverlap {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

inline VoxelOverlap voxel_overlap(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_geometry(pred, gt, "voxel_overlap");
    VoxelOverlap o;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, g = gt[i] != 0;
        o.tp += p && g;
        o.fp += p && !g;
        o.fn += !p && g;
    }
    return o;
}

inline double dice_from_counts(const VoxelOverlap& o) {
    const std::size_t denom = 2 * o.tp + o.fn + o.fp;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(o.tp) / static_cast<double>(denom);
}

/// Symmetric; 1 when both masks are empty.
inline double dice(const BinaryMask& pred, const BinaryMask& gt) { return dice_from_counts(voxel_overlap(pred, gt)); }

/// One row of the lesion match table.
struct LesionMatch {
    enum class Side { reference, prediction };
    Side side = Side::reference;
    std::int32_t label = 0;
    std::size_t voxels = 0;
    double volume_mm3 = 0.0;
    std::size_t overlap_voxels = 0;  ///< voxels also on the other mask
    double overlap_ratio = 0.0;
    double outside_ratio = 0.0;
    bool positive = false;
};

struct LesionMetrics {
    double sensitivity = 1.0;  ///< S_L
    double ppv = 1.0;          ///< P_L
    double f1 = 1.0;           ///< LesF1
    int n_gt = 0;
    int n_pred = 0;
    int detected_gt = 0;
    int tp_pred = 0;
    bool empty_convention = false;  ///< both masks had no lesions
    std::vector<LesionMatch> matches;
};

inline double lesion_f1(double s, double p) { return s + p == 0.0 ? 0.0 : 2.0 * s * p / (s + p); }

inline LesionMetrics lesion_metrics(const BinaryMask& pred_in, const BinaryMask& gt_in,
                                    const DetectionThresholds& th = {}) {
    require_same_geometry(pred_in, gt_in, "lesion_metrics");
    th.validate();
    const bool filter_pred = th.filter_side != SizeFilterSide::reference_only;
    const bool filter_gt = th.filter_side != SizeFilterSide::prediction_only;
    const BinaryMask pred = filter_pred ? filter_small_lesions(pred_in, th.min_lesion_mm3, th.connectivity) : pred_in;
    const BinaryMask gt = filter_gt ? filter_small_lesions(gt_in, th.min_lesion_mm3, th.connectivity) : gt_in;

    const auto gl = connected_components(gt, th.connectivity);
    const auto pl = connected_components(pred, th.connectivity);
    const double vv = gt.geometry.voxel_volume_mm3();

    std::vector<std::size_t> gt_size(static_cast<std::size_t>(gl.count) + 1, 0), gt_hit(gt_size.size(), 0);
    std::vector<std::size_t> pr_size(static_cast<std::size_t>(pl.count) + 1, 0), pr_hit(pr_size.size(), 0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const auto g = static_cast<std::size_t>(gl.labels[i]);
        const auto p = static_cast<std::size_t>(pl.labels[i]);
        if (g) {
            ++gt_size[g];
            if (pred[i]) ++gt_hit[g];
        }
        if (p) {
            ++pr_size[p];
            if (gt[i]) ++pr_hit[p];
        }
    }

    LesionMetrics m;
    m.n_gt = gl.count;
    m.n_pred = pl.count;
    for (std::int32_t l = 1; l <= gl.count; ++l) {
        const auto k = static_cast<std::size_t>(l);
        LesionMatch row;
        row.side = LesionMatch::Side::reference;
        row.label = l;
        row.voxels = gt_size[k];
        row.volume_mm3 = static_cast<double>(gt_size[k]) * vv;
        row.overlap_voxels = gt_hit[k];
        row.overlap_ratio = static_cast<double>(gt_hit[k]) / static_cast<double>(gt_size[k]);
        row.outside_ratio = 1.0 - row.overlap_ratio;
        row.positive = row.overlap_ratio >= th.sens_overlap;
        m.detected_gt += row.positive;
        m.matches.push_back(row);
    }
    for (std::int32_t l = 1; l <= pl.count; ++l) {
        const auto k = static_cast<std::size_t>(l);
        LesionMatch row;
        row.side = LesionMatch::Side::prediction;
        row.label = l;
        row.voxels = pr_size[k];
        row.volume_mm3 = static_cast<double>(pr_size[k]) * vv;
        row.overlap_voxels = pr_hit[k];
        row.overlap_ratio = static_cast<double>(pr_hit[k]) / static_cast<double>(pr_size[k]);
        row.outside_ratio = static_cast<double>(pr_size[k] - pr_hit[k]) / static_cast<double>(pr_size[k]);
        row.positive = row.overlap_ratio >= th.ppv_overlap && row.outside_ratio <= th.ppv_outside;
        m.tp_pred += row.positive;
        m.matches.push_back(row);
    }

    if (m.n_gt == 0 && m.n_pred == 0) {
        m.empty_convention = true;
        m.sensitivity = m.ppv = m.f1 = 1.0;
        return m;
    }
    // A side without lesions scores vacuously 1, so adding a false positive
    // to an empty reference leaves S_L unchanged.
    m.sensitivity = m.n_gt == 0 ? 1.0 : static_cast<double>(m.detected_gt) / m.n_gt;
    m.ppv = m.n_pred == 0 ? 1.0 : static_cast<double>(m.tp_pred) / m.n_pred;
    m.f1 = lesion_f1(m.sensitivity, m.ppv);
    return m;
}

inline double average_score(double dice_value, double les_f1) { return 0.5 * (dice_value + les_f1); }

struct CaseReport {
    double dice = 1.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    int n_gt_lesions = 0;
    int n_pred_lesions = 0;
    int detected_gt = 0;
    int tp_pred = 0;
    double lesion_sensitivity = 1.0;
    double lesion_ppv = 1.0;
    double les_f1 = 1.0;
    double avg_score = 1.0;
    bool dice_empty_convention = false;
    bool lesion_empty_convention = false;
    std::vector<LesionMatch> matches;
};

/// Assembles a report from already computed voxel counts and lesion metrics.
inline CaseReport assemble_case_report(const VoxelOverlap& o, const LesionMetrics& lm) {
    CaseReport r;
    r.tp = o.tp;
    r.fp = o.fp;
    r.fn = o.fn;
    r.dice = dice_from_counts(o);
    r.dice_empty_convention = (o.tp + o.fp + o.fn) == 0;
    r.n_gt_lesions = lm.n_gt;
    r.n_pred_lesions = lm.n_pred;
    r.detected_gt = lm.detected_gt;
    r.tp_pred = lm.tp_pred;
    r.lesion_sensitivity = lm.sensitivity;
    r.lesion_ppv = lm.ppv;
    r.les_f1 = lm.f1;
    r.lesion_empty_convention = lm.empty_convention;
    r.avg_score = average_score(r.dice, r.les_f1);
    r.matches = lm.matches;
    return r;
}

inline CaseReport evaluate_case(const BinaryMask& pred, const BinaryMask& gt, const DetectionThresholds& th = {}) {
    return assemble_case_report(voxel_overlap(pred, gt), lesion_metrics(pred, gt, th));
}

/// Voxelwise mean of probability maps, "on" where mean >= threshold.
inline BinaryMask consensus(const std::vector<Volume>& prob_maps, double threshold = 0.5) {
    if (prob_maps.empty()) throw DomainError("consensus: at least one probability map is required");
    for (const auto& p : prob_maps) {
        require_same_geometry(prob_maps.front(), p, "consensus");
        for (double x : p.data)
            if (!(x >= 0.0 && x <= 1.0)) throw DomainError("consensus: probabilities must lie in [0,1]");
    }
    BinaryMask out(prob_maps.front().geometry);
    const auto n = static_cast<double>(prob_maps.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (const auto& p : prob_maps) s += p[i];
        out[i] = s / n >= threshold ? 1 : 0;
    }
    return out;
}

/// Presentation rounding to three decimals (correctly rounded, as printf).
inline std::string format_score(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

}  // namespace lesionforge
