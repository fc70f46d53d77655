#include <gtest/gtest.h>

#include <sstream>

#include "lesionforge/commands.hpp"
#include "support.hpp"

using namespace lesionforge;
using testing_support::TempDir;

namespace {

const auto kGeom = Geometry::from_spacing({24, 24, 20}, {1.0, 1.0, 1.5});

struct Cli {
    int status;
    std::string out, err;
};

Cli cli(const TempDir& dir, const std::string& args) {
    const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
    const int rc = testing_support::run_shell(std::string(LESIONFORGE_CLI) + " " + args + " >" + out.string() + " 2>" +
                                              err.string());
    return {rc, testing_support::read_file(out), testing_support::read_file(err)};
}

BinaryMask case_lesions(int k) {
    BinaryMask m(kGeom);
    testing_support::set_box(m, {4 + k, 4, 4}, {6 + k, 6, 6});
    testing_support::set_box(m, {14, 12 + k, 10}, {16, 15 + k, 12});
    return m;
}

// Writes <dir>/data/case<k>/{flair,lesion}.nii.gz and a manifest.
std::filesystem::path make_dataset(const TempDir& dir, int n_cases) {
    json cases = json::array();
    for (int k = 0; k < n_cases; ++k) {
        const std::string id = "case" + std::to_string(k);
        const auto cdir = dir / "data" / id;
        std::filesystem::create_directories(cdir);
        Volume v = testing_support::phantom(kGeom, static_cast<std::uint64_t>(k + 1));
        const BinaryMask m = case_lesions(k);
        for (std::size_t i = 0; i < v.size(); ++i)
            if (m[i]) v[i] += 70.0;
        save_volume(v, cdir / "flair.nii.gz", NiftiType::float32);
        save_mask(m, cdir / "lesion.nii.gz");
        cases.push_back({{"id", id}, {"flair", id + "/flair.nii.gz"}, {"lesion_mask", id + "/lesion.nii.gz"}});
    }
    const auto path = dir / "manifest.json";
    write_json_file({{"base_dir", "data"}, {"cases", cases}}, path);
    return path;
}

std::filesystem::path write_report(const TempDir& dir, const std::string& name, const std::vector<double>& scores,
                                   const std::string& prefix = "c") {
    json cases = json::array();
    for (std::size_t i = 0; i < scores.size(); ++i)
        cases.push_back({{"id", prefix + std::to_string(i)}, {"avg_score", scores[i]}, {"dice", scores[i]}});
    const auto path = dir / name;
    write_json_file({{"methods", {{"m", {{"cases", cases}}}}}}, path);
    return path;
}

}  // namespace

// --- augment ----------------------------------------------------------------

TEST(AugmentCommand, EmptyManifestWarnsAndSucceeds) {
    TempDir dir;
    write_json_file({{"cases", json::array()}}, dir / "empty.json");
    const auto r = cli(dir, "augment --manifest " + (dir / "empty.json").string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.err.find("no cases"), std::string::npos);
    EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(AugmentCommand, RerunIsByteIdentical) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 3);
    for (const char* out : {"a", "b"}) {
        const auto r = cli(dir, "augment --manifest " + manifest.string() + " --seed 17 --jobs 2 --out " + (dir / out).string());
        ASSERT_EQ(r.status, 0) << r.err;
    }
    const auto a = testing_support::tree_hashes(dir / "a"), b = testing_support::tree_hashes(dir / "b");
    EXPECT_EQ(a.size(), 7u);
    EXPECT_EQ(a, b);
    EXPECT_EQ(cli(dir, "augment --manifest " + manifest.string() + " --seed 18 --out " + (dir / "c").string()).status, 0);
    EXPECT_NE(testing_support::tree_hashes(dir / "c"), a);
}

TEST(AugmentCommand, NoiseOnlyPolicyPlans) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 4);
    write_json_file(policy_to_json(SamplingPolicy::only(ArtifactKind::gaussian_noise)), dir / "noise.json");
    const auto r = cli(dir, "augment --manifest " + manifest.string() + " --config " + (dir / "noise.json").string() +
                                " --out " + (dir / "out").string());
    ASSERT_EQ(r.status, 0) << r.err;
    for (int k = 0; k < 4; ++k) {
        const auto plan = read_json_file(dir / "out" / ("case" + std::to_string(k)) / "plan.json");
        ASSERT_EQ(plan["artifacts"].size(), 1u);
        EXPECT_EQ(plan["artifacts"][0]["type"], "gaussian_noise");
        EXPECT_EQ(plan["case_id"], "case" + std::to_string(k));
        EXPECT_EQ(plan["case_seed"].get<std::uint64_t>(), derive_seed(0, "augment/case" + std::to_string(k)));
        const auto replay = apply_plan(load_volume(dir / "data" / ("case" + std::to_string(k)) / "flair.nii.gz"),
                                       plan_from_json(plan));
        const auto written = load_volume(dir / "out" / ("case" + std::to_string(k)) / "augmented.nii.gz");
        for (std::size_t i = 0; i < replay.size(); ++i)
            ASSERT_EQ(static_cast<float>(replay[i]), static_cast<float>(written[i]));
    }
}

TEST(AugmentCommand, BadConfigIsUsageError) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 1);
    std::ofstream(dir / "bad.json") << R"({"artifacts":{"blur":{"sd":[3,1]}}})";
    const auto r = cli(dir, "augment --manifest " + manifest.string() + " --config " + (dir / "bad.json").string() +
                                " --out " + (dir / "out").string());
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("blur"), std::string::npos);
    EXPECT_EQ(cli(dir, "augment --out " + (dir / "out").string()).status, 1);
    EXPECT_EQ(cli(dir, "frobnicate").status, 1);
    EXPECT_EQ(cli(dir, "--help").status, 0);
}

TEST(AugmentCommand, MissingInputIsPartialFailure) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 3);
    std::filesystem::remove(dir / "data" / "case1" / "flair.nii.gz");
    const auto r = cli(dir, "augment --manifest " + manifest.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "case0" / "augmented.nii.gz"));
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "case2" / "augmented.nii.gz"));
    const auto log = testing_support::read_file(dir / "out" / "errors.log");
    EXPECT_NE(log.find("case1"), std::string::npos);
    EXPECT_EQ(log.find("case0"), std::string::npos);
}

TEST(AugmentCommand, InProcessMatchesCli) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 2);
    std::ostringstream out, err;
    AugmentOptions o;
    o.manifest = manifest;
    o.seed = 5;
    o.jobs = 1;
    o.out_dir = dir / "inproc";
    ASSERT_EQ(cmd_augment(o, {out, err}), 0) << err.str();
    ASSERT_EQ(cli(dir, "augment --manifest " + manifest.string() + " --seed 5 --out " + (dir / "cli").string()).status, 0);
    EXPECT_EQ(testing_support::tree_hashes(dir / "inproc"), testing_support::tree_hashes(dir / "cli"));
}

// --- synthesize ---------------------------------------------------------------

TEST(SynthesizeCommand, KeepAllGivesEmptyNewLesionMask) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 2);
    write_json_file({{"fate_probabilities", {{"keep_both", 1.0}}}, {"generated_count", {0, 0}}}, dir / "keep.json");
    const auto r = cli(dir, "synthesize --manifest " + manifest.string() + " --config " + (dir / "keep.json").string() +
                                " --out " + (dir / "out").string());
    ASSERT_EQ(r.status, 0) << r.err;
    for (const char* c : {"case0", "case1"})
        EXPECT_EQ(count_on(load_mask(dir / "out" / c / "pair_0" / "new_lesions.nii.gz")), 0u);
    const auto m = load_manifest(dir / "out" / "manifest.json");
    ASSERT_EQ(m.cases.size(), 2u);
    EXPECT_EQ(m.cases[0].id, "case0/pair_0");
    EXPECT_TRUE(std::filesystem::exists(m.require(m.cases[1], "gt")));
    EXPECT_TRUE(std::filesystem::exists(m.require(m.cases[1], "t2")));
}

TEST(SynthesizeCommand, PairsReplayFromProvenanceAndValidate) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 2);
    const auto r = cli(dir, "synthesize --manifest " + manifest.string() + " --pairs 8 --seed 3 --out " +
                                (dir / "out").string());
    ASSERT_EQ(r.status, 0) << r.err;
    const auto m = load_manifest(manifest);
    for (const auto& c : m.cases) {
        const auto in = load_synthesis_inputs(m, c);
        for (int k = 0; k < 8; ++k) {
            const auto pdir = dir / "out" / c.id / ("pair_" + std::to_string(k));
            const auto prov = read_json_file(pdir / "provenance.json");
            EXPECT_EQ(prov["seed"].get<std::uint64_t>(), pair_seed(3, c.id, k));
            Rng rng(prov["seed"].get<std::uint64_t>());
            const auto pair = synthesize_pair(in.flair, in.lesion_mask, BaselineEditor{},
                                              synthesis_policy_from_json(prov["policy"]), in.priors(), rng);
            EXPECT_TRUE(validate_pair(pair).empty());
            EXPECT_EQ(load_mask(pdir / "new_lesions.nii.gz").data, pair.new_lesion_mask.data) << pdir;
            const auto t2 = load_volume(pdir / "t2.nii.gz");
            for (std::size_t i = 0; i < t2.size(); ++i) ASSERT_EQ(static_cast<float>(t2[i]), static_cast<float>(pair.t2[i]));
            EXPECT_EQ(prov["fates"].size(), static_cast<std::size_t>(pair.lesions.count));
        }
    }
}

TEST(SynthesizeCommand, RerunIsByteIdentical) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 2);
    for (const char* out : {"a", "b"})
        ASSERT_EQ(cli(dir, "synthesize --manifest " + manifest.string() + " --pairs 2 --seed 9 --jobs 2 --out " +
                               (dir / out).string())
                      .status,
                  0);
    EXPECT_EQ(testing_support::tree_hashes(dir / "a"), testing_support::tree_hashes(dir / "b"));
}

TEST(SynthesizeCommand, FailingEditorFailsCase) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 2);
    const auto handler = dir / "handler.sh";
    std::ofstream(handler) << "#!/bin/sh\necho cannot load weights\nexit 4\n";
    std::filesystem::permissions(handler, std::filesystem::perms::owner_all);
    write_json_file({{"fate_probabilities", {{"remove_both", 1.0}}}}, dir / "remove.json");
    const auto r = cli(dir, "synthesize --manifest " + manifest.string() + " --config " + (dir / "remove.json").string() +
                                " --editor " + handler.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(r.status, 2);
    const auto log = testing_support::read_file(dir / "out" / "errors.log");
    EXPECT_NE(log.find("status 4"), std::string::npos) << log;
    EXPECT_NE(log.find("cannot load weights"), std::string::npos) << log;
    EXPECT_TRUE(load_manifest(dir / "out" / "manifest.json").cases.empty());
}

TEST(SynthesizeCommand, ExternalCliEditorMatchesBaseline) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 1);
    ASSERT_EQ(cli(dir, "synthesize --manifest " + manifest.string() + " --out " + (dir / "base").string()).status, 0);
    ASSERT_EQ(cli(dir, "synthesize --manifest " + manifest.string() + " --editor '" + LESIONFORGE_CLI +
                           " edit-handler' --out " + (dir / "ext").string())
                  .status,
              0);
    for (const char* f : {"t1.nii.gz", "t2.nii.gz", "new_lesions.nii.gz"})
        EXPECT_EQ(testing_support::read_file(dir / "base" / "case0" / "pair_0" / f),
                  testing_support::read_file(dir / "ext" / "case0" / "pair_0" / f))
            << f;
}

TEST(SynthesizeCommand, InvalidPairCount) {
    TempDir dir;
    const auto manifest = make_dataset(dir, 1);
    EXPECT_EQ(cli(dir, "synthesize --manifest " + manifest.string() + " --pairs 0 --out " + (dir / "o").string()).status, 1);
}

// --- evaluate ---------------------------------------------------------------

namespace {

// Manifest whose predictions are the gt masks shifted by `shift` voxels in x.
std::filesystem::path make_eval_set(const TempDir& dir, const std::string& name, int shift, int n_cases = 4) {
    json cases = json::array();
    for (int k = 0; k < n_cases; ++k) {
        const std::string id = "s" + std::to_string(k);
        const BinaryMask gt = case_lesions(k);
        BinaryMask pred(kGeom);
        for (std::int64_t z = 0; z < 20; ++z)
            for (std::int64_t y = 0; y < 24; ++y)
                for (std::int64_t x = 0; x + shift < 24; ++x) pred.at(x + shift, y, z) = gt.at(x, y, z);
        std::filesystem::create_directories(dir / name);
        save_mask(gt, dir / name / (id + "_gt.nii.gz"));
        save_mask(pred, dir / name / (id + "_pred.nii.gz"));
        cases.push_back({{"id", id}, {"gt", id + "_gt.nii.gz"}, {"prediction", id + "_pred.nii.gz"}});
    }
    const auto path = dir / (name + ".json");
    write_json_file({{"base_dir", name}, {"cases", cases}}, path);
    return path;
}

}  // namespace

TEST(EvaluateCommand, PerfectPredictionScoresOne) {
    TempDir dir;
    const auto m = make_eval_set(dir, "perfect", 0);
    const auto r = cli(dir, "evaluate --manifest " + m.string() + " --out " + (dir / "report.json").string());
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rep = read_json_file(dir / "report.json");
    const auto& means = rep["methods"]["prediction"]["means"];
    for (const char* k : {"avg_score", "dice", "les_f1", "lesion_sensitivity", "lesion_ppv"}) EXPECT_EQ(means[k], 1.0) << k;
    EXPECT_NE(r.out.find("Avg. Score"), std::string::npos);
    EXPECT_NE(r.out.find("1.000"), std::string::npos);
}

TEST(EvaluateCommand, TwoManifestsGiveTwoMethodsMatchingDirectScores) {
    TempDir dir;
    const auto a = make_eval_set(dir, "exact", 0), b = make_eval_set(dir, "shifted", 1);
    const auto r = cli(dir, "evaluate --manifest " + a.string() + " --manifest " + b.string() + " --out " +
                                (dir / "report.json").string());
    ASSERT_EQ(r.status, 0) << r.err;
    const auto rep = read_json_file(dir / "report.json");
    ASSERT_TRUE(rep["methods"].contains("exact"));
    ASSERT_TRUE(rep["methods"].contains("shifted"));
    EXPECT_NE(r.out.find("shifted"), std::string::npos);
    for (int k = 0; k < 4; ++k) {
        const std::string id = "s" + std::to_string(k);
        const auto direct = evaluate_case(load_mask(dir / "shifted" / (id + "_pred.nii.gz")),
                                          load_mask(dir / "shifted" / (id + "_gt.nii.gz")));
        const auto& row = rep["methods"]["shifted"]["cases"][static_cast<std::size_t>(k)];
        EXPECT_EQ(row["id"], id);
        EXPECT_EQ(row["dice"].get<double>(), direct.dice);
        EXPECT_EQ(row["les_f1"].get<double>(), direct.les_f1);
        EXPECT_EQ(row["avg_score"].get<double>(), direct.avg_score);
    }
    EXPECT_EQ(rep["wilcoxon"].size(), 1u);
}

TEST(EvaluateCommand, MissingFilesArePartialFailure) {
    TempDir dir;
    const auto m = make_eval_set(dir, "set", 0);
    std::filesystem::remove(dir / "set" / "s2_pred.nii.gz");
    const auto r = cli(dir, "evaluate --manifest " + m.string() + " --out " + (dir / "report.json").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("s2"), std::string::npos);
    const auto rep = read_json_file(dir / "report.json");
    EXPECT_EQ(rep["methods"]["prediction"]["cases"].size(), 3u);
    EXPECT_EQ(rep["failed_cases"].size(), 1u);
}

TEST(EvaluateCommand, DuplicateMethodCaseIsUsageError) {
    TempDir dir;
    const auto m = make_eval_set(dir, "set", 0);
    const auto r = cli(dir, "evaluate --manifest " + m.string() + " --manifest " + m.string() + " --out " +
                                (dir / "report.json").string());
    EXPECT_EQ(r.status, 1);
}

// --- compare ----------------------------------------------------------------

TEST(CompareCommand, SelfComparisonIsNotSignificant) {
    TempDir dir;
    const auto a = write_report(dir, "a.json", {0.5, 0.6, 0.7, 0.8});
    const auto r = cli(dir, "compare " + a.string() + " " + a.string());
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("p=1 "), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("not significant"), std::string::npos);
}

TEST(CompareCommand, SixConsistentImprovements) {
    TempDir dir;
    const auto a = write_report(dir, "a.json", {0.61, 0.72, 0.53, 0.84, 0.45, 0.66});
    const auto b = write_report(dir, "b.json", {0.60, 0.70, 0.50, 0.80, 0.40, 0.60});
    const auto r = cli(dir, "compare " + a.string() + " " + b.string());
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_NE(r.out.find("n=6 W=0.0 p=0.03125 (exact)"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("\nsignificant"), std::string::npos) << r.out;
    const auto d = cli(dir, "compare --metric dice " + a.string() + " " + b.string());
    EXPECT_NE(d.out.find("metric=dice"), std::string::npos);
}

TEST(CompareCommand, MismatchedIdsAndBadOptions) {
    TempDir dir;
    const auto a = write_report(dir, "a.json", {0.1, 0.2, 0.3});
    const auto b = write_report(dir, "b.json", {0.1, 0.2, 0.3}, "d");
    const auto r = cli(dir, "compare " + a.string() + " " + b.string());
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("c0 (only in A)"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("d2 (only in B)"), std::string::npos) << r.err;
    EXPECT_EQ(cli(dir, "compare --metric hausdorff " + a.string() + " " + a.string()).status, 1);
    EXPECT_EQ(cli(dir, "compare --method-a other " + a.string() + " " + a.string()).status, 1);
}

// --- consensus --------------------------------------------------------------

TEST(ConsensusCommand, MatchesLibrary) {
    TempDir dir;
    std::mt19937_64 gen(4);
    std::vector<Volume> maps;
    std::string args = "consensus --threshold 0.4 --out " + (dir / "c.nii.gz").string();
    for (int k = 0; k < 3; ++k) {
        maps.push_back(testing_support::random_volume(kGeom, gen));
        const auto p = dir / ("p" + std::to_string(k) + ".nii.gz");
        save_volume(maps.back(), p, NiftiType::float64);
        args += " " + p.string();
    }
    const auto r = cli(dir, args);
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(load_mask(dir / "c.nii.gz").data, consensus(maps, 0.4).data);
}

TEST(ConsensusCommand, GeometryMismatchIsUsageError) {
    TempDir dir;
    save_volume(Volume(kGeom), dir / "a.nii.gz", NiftiType::float32);
    save_volume(Volume(Geometry::from_spacing({24, 24, 19})), dir / "b.nii.gz", NiftiType::float32);
    const auto r = cli(dir, "consensus --out " + (dir / "c.nii.gz").string() + " " + (dir / "a.nii.gz").string() + " " +
                                (dir / "b.nii.gz").string());
    EXPECT_EQ(r.status, 1);
    EXPECT_FALSE(std::filesystem::exists(dir / "c.nii.gz"));
}

// --- helpers ----------------------------------------------------------------

TEST(ParallelFor, VisitsEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(Conform, AcceptsSmallGeometryDrift) {
    Geometry drift = kGeom;
    drift.affine[0][3] += 5e-4;
    const BinaryMask m(drift);
    EXPECT_EQ(detail::conform(m, kGeom, "mask").geometry, kGeom);
    drift.affine[0][3] += 0.1;
    EXPECT_THROW(detail::conform(BinaryMask(drift), kGeom, "mask"), GeometryMismatchError);
}
