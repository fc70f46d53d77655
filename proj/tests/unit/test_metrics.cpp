#include <gtest/gtest.h>

#include "lesionforge/metrics.hpp"
#include "lesionforge/metrics_io.hpp"
#include "support.hpp"

using namespace lesionforge;
using testing_support::set_box;
using testing_support::voxels;

namespace {

void expect_matches_oracle(const BinaryMask& pred, const BinaryMask& gt, const DetectionThresholds& th,
                           const std::string& what) {
    const auto r = evaluate_case(pred, gt, th);
    const auto o = oracle::lesion_scores(voxels(pred), voxels(gt), gt.geometry.voxel_volume_mm3(), th.min_lesion_mm3,
                                         static_cast<int>(th.connectivity));
    ASSERT_EQ(r.dice, oracle::dice(voxels(pred), voxels(gt))) << what;
    ASSERT_EQ(r.n_gt_lesions, o.n_gt) << what;
    ASSERT_EQ(r.n_pred_lesions, o.n_pred) << what;
    ASSERT_EQ(r.detected_gt, o.detected) << what;
    ASSERT_EQ(r.tp_pred, o.tp_pred) << what;
    ASSERT_EQ(r.lesion_sensitivity, o.sensitivity) << what;
    ASSERT_EQ(r.lesion_ppv, o.ppv) << what;
    ASSERT_EQ(r.les_f1, o.f1) << what;
}

BinaryMask from_bits(const Geometry& g, unsigned bits) {
    BinaryMask m(g);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (bits >> i) & 1u;
    return m;
}

}  // namespace

TEST(Dice, HandComputedAndEmpty) {
    const auto g = Geometry::from_spacing({4, 1, 1});
    const auto a = from_bits(g, 0b0111), b = from_bits(g, 0b1110);
    EXPECT_DOUBLE_EQ(dice(a, b), 4.0 / 6.0);
    const BinaryMask empty(g);
    EXPECT_EQ(dice(empty, empty), 1.0);
    EXPECT_EQ(dice(a, empty), 0.0);
}

TEST(LesionMetrics, ExhaustiveThreeByThreeAgainstOracle) {
    const auto g = Geometry::from_spacing({3, 3, 1});
    DetectionThresholds loose;
    loose.min_lesion_mm3 = 0.0;
    for (unsigned p = 0; p < 512; ++p)
        for (unsigned t = 0; t < 512; ++t) {
            const auto pred = from_bits(g, p), gt = from_bits(g, t);
            expect_matches_oracle(pred, gt, {}, std::to_string(p) + "/" + std::to_string(t));
            if ((p + t) % 7 == 0) expect_matches_oracle(pred, gt, loose, "loose " + std::to_string(p) + "/" + std::to_string(t));
        }
}

TEST(LesionMetrics, RandomVolumesAgainstOracle) {
    std::mt19937_64 gen(31);
    const auto g = Geometry::from_spacing({16, 16, 16}, {1.0, 1.0, 1.5});
    for (int trial = 0; trial < 60; ++trial) {
        const auto gt = testing_support::random_mask(g, 0.03 + 0.002 * trial, gen);
        auto pred = testing_support::random_mask(g, 0.03, gen);
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (gt[i] && gen() % 3 != 0) pred[i] = 1;
        DetectionThresholds th;
        th.connectivity = std::array{Connectivity::face, Connectivity::edge, Connectivity::vertex}[trial % 3];
        expect_matches_oracle(pred, gt, th, "trial " + std::to_string(trial));
    }
}

TEST(LesionMetrics, SensitivityBoundaryIsInclusive) {
    const auto g = Geometry::from_spacing({10, 10, 12});
    BinaryMask gt(g);
    set_box(gt, {0, 0, 0}, {9, 9, 9});  // 1000 voxels
    DetectionThresholds th;
    th.min_lesion_mm3 = 0.0;
    for (int hit : {99, 100}) {
        BinaryMask pred(g);
        for (int i = 0; i < hit; ++i) pred[static_cast<std::size_t>(i)] = 1;
        const auto m = lesion_metrics(pred, gt, th);
        EXPECT_EQ(m.detected_gt, hit == 100 ? 1 : 0) << hit;
    }
}

TEST(LesionMetrics, PpvOverlapBoundaryIsInclusive) {
    const auto g = Geometry::from_spacing({100, 1, 1});
    DetectionThresholds th;
    th.min_lesion_mm3 = 0.0;
    BinaryMask pred(g);
    set_box(pred, {0, 0, 0}, {99, 0, 0});
    for (int on : {64, 65}) {
        BinaryMask gt(g);
        set_box(gt, {0, 0, 0}, {on - 1, 0, 0});
        const auto m = lesion_metrics(pred, gt, th);
        EXPECT_EQ(m.tp_pred, on == 65 ? 1 : 0) << on;
    }
}

TEST(LesionMetrics, PpvOutsideBoundaryIsInclusive) {
    const auto g = Geometry::from_spacing({100, 1, 1});
    DetectionThresholds th;
    th.min_lesion_mm3 = 0.0;
    th.ppv_overlap = 0.2;
    BinaryMask pred(g);
    set_box(pred, {0, 0, 0}, {99, 0, 0});
    for (int on : {29, 30}) {
        BinaryMask gt(g);
        set_box(gt, {0, 0, 0}, {on - 1, 0, 0});
        const auto m = lesion_metrics(pred, gt, th);
        EXPECT_EQ(m.tp_pred, on == 30 ? 1 : 0) << on;
    }
}

TEST(LesionMetrics, MinimumVolumeIsInclusive) {
    for (double dz : {2.999, 3.0}) {
        const auto g = Geometry::from_spacing({5, 5, 5}, {1.0, 1.0, dz});
        BinaryMask gt(g);
        gt.at(2, 2, 2) = 1;
        const auto m = lesion_metrics(gt, gt);
        EXPECT_EQ(m.n_gt, dz == 3.0 ? 1 : 0) << dz;
        EXPECT_EQ(m.n_pred, dz == 3.0 ? 1 : 0) << dz;
    }
}

TEST(LesionMetrics, SizeFilterSides) {
    const auto g = Geometry::from_spacing({8, 8, 8});
    BinaryMask gt(g), pred(g);
    set_box(gt, {0, 0, 0}, {2, 2, 2});
    pred.at(6, 6, 6) = 1;
    gt.at(6, 1, 6) = 1;
    DetectionThresholds th;
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_pred, 0);
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_gt, 1);
    th.filter_side = SizeFilterSide::reference_only;
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_pred, 1);
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_gt, 1);
    th.filter_side = SizeFilterSide::prediction_only;
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_pred, 0);
    EXPECT_EQ(lesion_metrics(pred, gt, th).n_gt, 2);
}

TEST(LesionMetrics, EmptyConventions) {
    const auto g = Geometry::from_spacing({6, 6, 6});
    const BinaryMask empty(g);
    BinaryMask lesion(g);
    set_box(lesion, {1, 1, 1}, {2, 2, 2});

    const auto both = evaluate_case(empty, empty);
    EXPECT_EQ(both.dice, 1.0);
    EXPECT_EQ(both.les_f1, 1.0);
    EXPECT_EQ(both.avg_score, 1.0);
    EXPECT_TRUE(both.dice_empty_convention);
    EXPECT_TRUE(both.lesion_empty_convention);

    const auto missed = evaluate_case(empty, lesion);
    EXPECT_EQ(missed.lesion_sensitivity, 0.0);
    EXPECT_EQ(missed.lesion_ppv, 1.0);
    EXPECT_EQ(missed.dice, 0.0);

    const auto spurious = evaluate_case(lesion, empty);
    EXPECT_EQ(spurious.lesion_sensitivity, 1.0);
    EXPECT_EQ(spurious.lesion_ppv, 0.0);

    EXPECT_EQ(lesion_f1(0.0, 0.0), 0.0);
}

TEST(LesionMetrics, DistantFalsePositiveLeavesSensitivityUnchanged) {
    std::mt19937_64 gen(5);
    const auto g = Geometry::from_spacing({20, 20, 20});
    for (int trial = 0; trial < 30; ++trial) {
        BinaryMask gt(g), pred(g);
        for (int k = 0; k < 3; ++k) {
            const auto x = static_cast<std::int64_t>(gen() % 8), y = static_cast<std::int64_t>(gen() % 8);
            set_box(gt, {x, y, 1}, {x + 2, y + 1, 2});
            if (gen() % 2) set_box(pred, {x, y, 1}, {x + 1, y + 1, 2});
        }
        const auto before = evaluate_case(pred, gt);
        BinaryMask extra = pred;
        set_box(extra, {15, 15, 15}, {17, 17, 17});
        const auto after = evaluate_case(extra, gt);
        EXPECT_EQ(after.lesion_sensitivity, before.lesion_sensitivity);
        EXPECT_LE(after.lesion_ppv, before.lesion_ppv);
        EXPECT_EQ(after.n_pred_lesions, before.n_pred_lesions + 1);
        EXPECT_LT(after.dice, before.dice + 1e-15);
    }
}

TEST(LesionMetrics, GeometryMismatchRejected) {
    const BinaryMask a(Geometry::from_spacing({4, 4, 4})), b(Geometry::from_spacing({4, 4, 5}));
    EXPECT_THROW(evaluate_case(a, b), GeometryMismatchError);
}

TEST(Thresholds, ValidationAndJsonRoundTrip) {
    DetectionThresholds t;
    t.sens_overlap = 1.5;
    EXPECT_THROW(t.validate(), ParameterError);
    DetectionThresholds u;
    u.min_lesion_mm3 = 7.5;
    u.ppv_overlap = 0.5;
    u.connectivity = Connectivity::edge;
    u.filter_side = SizeFilterSide::prediction_only;
    const auto back = thresholds_from_json(thresholds_to_json(u));
    EXPECT_EQ(back.min_lesion_mm3, 7.5);
    EXPECT_EQ(back.ppv_overlap, 0.5);
    EXPECT_EQ(back.connectivity, Connectivity::edge);
    EXPECT_EQ(back.filter_side, SizeFilterSide::prediction_only);
    EXPECT_THROW(thresholds_from_json(json{{"min_lesion", 3}}), ParameterError);
}

TEST(Consensus, MeanThresholdIsInclusive) {
    const auto g = Geometry::from_spacing({3, 1, 1});
    const Volume a(g, std::vector<double>{0.2, 0.5, 1.0}), b(g, std::vector<double>{0.8, 0.4, 0.0});
    const auto m = consensus({a, b}, 0.5);
    EXPECT_EQ(m.data, (std::vector<std::uint8_t>{1, 0, 1}));
    EXPECT_EQ(consensus({a}).data, (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(Consensus, Errors) {
    const auto g = Geometry::from_spacing({2, 1, 1});
    EXPECT_THROW(consensus({}), DomainError);
    EXPECT_THROW(consensus({Volume(g, std::vector<double>{0.1, 1.2})}), DomainError);
    EXPECT_THROW(consensus({Volume(g), Volume(Geometry::from_spacing({1, 2, 1}))}), GeometryMismatchError);
}

TEST(FormatScore, ThreeDecimals) {
    EXPECT_EQ(format_score(average_score(0.514, 0.573)), "0.543");
    EXPECT_EQ(format_score(1.0), "1.000");
    EXPECT_EQ(format_score(0.0), "0.000");
    EXPECT_EQ(format_score(0.12349), "0.123");
}

TEST(DatasetReport, MeansAndPairedTest) {
    const auto g = Geometry::from_spacing({8, 8, 8});
    BinaryMask gt(g), half(g);
    set_box(gt, {0, 0, 0}, {3, 3, 3});
    set_box(half, {0, 0, 0}, {3, 3, 1});
    std::map<std::string, std::vector<MethodCase>> methods;
    for (int c = 0; c < 3; ++c) {
        methods["perfect"].push_back({"c" + std::to_string(c), evaluate_case(gt, gt)});
        methods["half"].push_back({"c" + std::to_string(c), evaluate_case(half, gt)});
    }
    const auto j = dataset_report(methods, {});
    EXPECT_EQ(j["methods"]["perfect"]["means"]["avg_score"].get<double>(), 1.0);
    EXPECT_NEAR(j["methods"]["half"]["means"]["dice"].get<double>(), 64.0 / 96.0, 1e-12);
    ASSERT_EQ(j["wilcoxon"].size(), 1u);
    EXPECT_EQ(j["methods"]["half"]["cases"][2]["id"], "c2");
}
