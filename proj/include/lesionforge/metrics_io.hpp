#pragma once

// JSON forms of thresholds, case reports and dataset-level reports.

#include <map>
#include <string>
#include <vector>

#include "lesionforge/augment_io.hpp"
#include "lesionforge/metrics.hpp"
#include "lesionforge/stats.hpp"

namespace lesionforge {

inline json thresholds_to_json(const DetectionThresholds& t) {
    const char* side = t.filter_side == SizeFilterSide::both              ? "both"
                       : t.filter_side == SizeFilterSide::reference_only ? "reference"
                                                                          : "prediction";
    return {{"min_lesion_mm3", t.min_lesion_mm3}, {"sens_overlap", t.sens_overlap},
            {"ppv_overlap", t.ppv_overlap},       {"ppv_outside", t.ppv_outside},
            {"connectivity", static_cast<int>(t.connectivity)}, {"filter_side", side}};
}

inline DetectionThresholds thresholds_from_json(const json& j) {
    detail::reject_unknown(j, {"min_lesion_mm3", "sens_overlap", "ppv_overlap", "ppv_outside", "connectivity", "filter_side"},
                           "thresholds");
    DetectionThresholds t;
    t.min_lesion_mm3 = j.value("min_lesion_mm3", t.min_lesion_mm3);
    t.sens_overlap = j.value("sens_overlap", t.sens_overlap);
    t.ppv_overlap = j.value("ppv_overlap", t.ppv_overlap);
    t.ppv_outside = j.value("ppv_outside", t.ppv_outside);
    if (j.contains("connectivity")) t.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
    if (j.contains("filter_side")) {
        const auto s = j.at("filter_side").get<std::string>();
        if (s == "both") t.filter_side = SizeFilterSide::both;
        else if (s == "reference") t.filter_side = SizeFilterSide::reference_only;
        else if (s == "prediction") t.filter_side = SizeFilterSide::prediction_only;
        else throw ParameterError("thresholds: filter_side must be both, reference or prediction");
    }
    t.validate();
    return t;
}

inline json case_report_to_json(const CaseReport& r) {
    json matches = json::array();
    for (const auto& m : r.matches)
        matches.push_back({{"side", m.side == LesionMatch::Side::reference ? "reference" : "prediction"},
                           {"label", m.label},
                           {"voxels", m.voxels},
                           {"volume_mm3", m.volume_mm3},
                           {"overlap_voxels", m.overlap_voxels},
                           {"overlap_ratio", m.overlap_ratio},
                           {"outside_ratio", m.outside_ratio},
                           {"positive", m.positive}});
    json flags = json::array();
    if (r.dice_empty_convention) flags.push_back("dice_both_empty");
    if (r.lesion_empty_convention) flags.push_back("lesions_both_empty");
    return {{"dice", r.dice},
            {"tp", r.tp},
            {"fp", r.fp},
            {"fn", r.fn},
            {"n_gt_lesions", r.n_gt_lesions},
            {"n_pred_lesions", r.n_pred_lesions},
            {"detected_gt", r.detected_gt},
            {"tp_pred", r.tp_pred},
            {"lesion_sensitivity", r.lesion_sensitivity},
            {"lesion_ppv", r.lesion_ppv},
            {"les_f1", r.les_f1},
            {"avg_score", r.avg_score},
            {"conventions", flags},
            {"matches", matches}};
}

/// Names of the per-case scalar metrics usable for paired comparisons.
inline const std::vector<std::string>& comparable_metrics() {
    static const std::vector<std::string> names{"avg_score", "dice", "les_f1", "lesion_sensitivity", "lesion_ppv"};
    return names;
}

inline double metric_value(const CaseReport& r, const std::string& name) {
    if (name == "avg_score") return r.avg_score;
    if (name == "dice") return r.dice;
    if (name == "les_f1") return r.les_f1;
    if (name == "lesion_sensitivity") return r.lesion_sensitivity;
    if (name == "lesion_ppv") return r.lesion_ppv;
    throw ParameterError("unknown metric '" + name + "'");
}

struct MethodCase {
    std::string case_id;
    CaseReport report;
};

/// Per-method case rows (same case order for every method) to a dataset
/// report: rows, means, and pairwise Wilcoxon p-values on avg_score.
inline json dataset_report(const std::map<std::string, std::vector<MethodCase>>& methods,
                           const DetectionThresholds& th) {
    json out;
    out["thresholds"] = thresholds_to_json(th);
    out["methods"] = json::object();
    for (const auto& [name, rows] : methods) {
        json cases = json::array();
        json means = json::object();
        for (const auto& metric : comparable_metrics()) {
            double s = 0.0;
            for (const auto& r : rows) s += metric_value(r.report, metric);
            means[metric] = rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
        }
        for (const auto& r : rows) {
            json c = case_report_to_json(r.report);
            c["id"] = r.case_id;
            cases.push_back(std::move(c));
        }
        out["methods"][name] = {{"cases", cases}, {"means", means}};
    }
    json tests = json::array();
    for (auto a = methods.begin(); a != methods.end(); ++a)
        for (auto b = std::next(a); b != methods.end(); ++b) {
            if (a->second.empty() || a->second.size() != b->second.size()) continue;
            std::vector<double> xa, xb;
            for (std::size_t i = 0; i < a->second.size(); ++i) {
                xa.push_back(a->second[i].report.avg_score);
                xb.push_back(b->second[i].report.avg_score);
            }
            const auto w = wilcoxon_signed_rank(xa, xb);
            tests.push_back({{"a", a->first}, {"b", b->first}, {"metric", "avg_score"}, {"statistic", w.statistic},
                             {"p_value", w.p_value}, {"exact", w.exact}});
        }
    out["wilcoxon"] = tests;
    return out;
}

}  // namespace lesionforge
