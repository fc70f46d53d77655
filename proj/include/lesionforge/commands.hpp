#pragma once

// Batch commands behind the `lesionforge` executable. Each returns a process
// exit code: 0 success, 1 usage or configuration error, 2 partial data failure.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lesionforge/external_editor.hpp"
#include "lesionforge/manifest.hpp"
#include "lesionforge/metrics_io.hpp"
#include "lesionforge/synth_io.hpp"

namespace lesionforge {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitPartial = 2 };

struct CommandStreams {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

/// Masks written by other tools often carry a float-rounded copy of the
/// reference affine; accept those and adopt the reference geometry.
template <class T>
Grid<T> conform(Grid<T> g, const Geometry& ref, const std::string& what) {
    if (!g.geometry.same_as(ref, 1e-3))
        throw GeometryMismatchError(what + ": " + g.geometry.describe() + " vs " + ref.describe());
    g.geometry = ref;
    return g;
}

struct CaseOutcome {
    bool ok = true;
    std::string message;
};

inline int finish_cases(const std::vector<std::string>& ids, const std::vector<CaseOutcome>& outcomes,
                        const std::optional<std::filesystem::path>& log_path, CommandStreams io) {
    std::ostringstream log;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (!outcomes[i].ok) {
            ++failed;
            log << ids[i] << ": " << outcomes[i].message << '\n';
        }
    if (failed == 0) return kExitOk;
    io.err << "error: " << failed << " of " << ids.size() << " case(s) failed\n" << log.str();
    if (log_path) {
        std::filesystem::create_directories(log_path->parent_path());
        std::ofstream(*log_path) << log.str();
    }
    return kExitPartial;
}

inline std::vector<std::string> split_command(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct AugmentOptions {
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> config;
    std::uint64_t seed = 0;
    unsigned jobs = default_jobs();
    std::filesystem::path out_dir;
};

inline int cmd_augment(const AugmentOptions& o, CommandStreams io = {}) {
    DatasetManifest manifest;
    SamplingPolicy policy;
    try {
        manifest = load_manifest(o.manifest);
        if (o.config) policy = policy_from_json(read_json_file(*o.config));
        validate_policy(policy);
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    if (manifest.cases.empty()) {
        io.err << "warning: manifest " << o.manifest.string() << " has no cases; nothing to do\n";
        return kExitOk;
    }

    std::vector<std::string> ids;
    for (const auto& c : manifest.cases) ids.push_back(c.id);
    std::vector<detail::CaseOutcome> outcomes(ids.size());
    parallel_for(ids.size(), o.jobs, [&](std::size_t i) {
        const auto& c = manifest.cases[i];
        try {
            const std::uint64_t case_seed = derive_seed(o.seed, "augment/" + c.id);
            Rng rng(case_seed);
            const AugmentationPlan plan = sample_plan(policy, rng);
            const Volume v = load_volume(manifest.require(c, "flair"));
            const Volume out = apply_plan(v, plan);
            const auto dir = o.out_dir / c.id;
            std::filesystem::create_directories(dir);
            save_volume(out, dir / "augmented.nii.gz", NiftiType::float32);
            json pj = plan_to_json(plan);
            pj["case_id"] = c.id;
            pj["case_seed"] = case_seed;
            write_json_file(pj, dir / "plan.json");
        } catch (const std::exception& e) {
            outcomes[i] = {false, e.what()};
        }
    });
    std::filesystem::create_directories(o.out_dir);
    write_json_file({{"command", "augment"}, {"seed", o.seed}, {"policy", policy_to_json(policy)}, {"cases", ids}},
                    o.out_dir / "run.json");
    return detail::finish_cases(ids, outcomes, o.out_dir / "errors.log", io);
}

// ---------------------------------------------------------------------------

struct SynthesizeOptions {
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> config;
    std::string editor = "baseline";  ///< "baseline" or a handler command line
    std::chrono::milliseconds editor_timeout = std::chrono::seconds(120);
    int n_pairs = 1;  ///< per case
    std::uint64_t seed = 0;
    unsigned jobs = default_jobs();
    std::filesystem::path out_dir;
};

inline std::unique_ptr<LesionEditor> make_editor(const std::string& descriptor, std::chrono::milliseconds timeout) {
    if (descriptor == "baseline") return std::make_unique<BaselineEditor>();
    return std::make_unique<ExternalEditor>(detail::split_command(descriptor), timeout);
}

inline std::uint64_t pair_seed(std::uint64_t root, const std::string& case_id, int k) {
    return derive_seed(derive_seed(root, "synthesize/" + case_id), static_cast<std::uint64_t>(k));
}

/// Inputs of one manifest case, conformed to the FLAIR geometry.
struct SynthesisInputs {
    Volume flair;
    BinaryMask lesion_mask;
    std::optional<Volume> atlas;
    std::optional<BinaryMask> wm_mask;

    PlacementPriors priors() const { return {atlas ? &*atlas : nullptr, wm_mask ? &*wm_mask : nullptr}; }
};

inline SynthesisInputs load_synthesis_inputs(const DatasetManifest& m, const CaseEntry& c) {
    SynthesisInputs in;
    in.flair = load_volume(m.require(c, "flair"));
    in.lesion_mask = detail::conform(load_mask(m.require(c, "lesion_mask")), in.flair.geometry, "lesion_mask");
    if (auto p = m.path_of(c, "atlas")) in.atlas = detail::conform(load_volume(*p), in.flair.geometry, "atlas");
    if (auto p = m.path_of(c, "wm_mask")) in.wm_mask = detail::conform(load_mask(*p), in.flair.geometry, "wm_mask");
    return in;
}

inline int cmd_synthesize(const SynthesizeOptions& o, CommandStreams io = {}) {
    DatasetManifest manifest;
    SynthesisPolicy policy;
    std::unique_ptr<LesionEditor> editor;
    try {
        if (o.n_pairs < 1) throw ParameterError("n_pairs must be >= 1");
        manifest = load_manifest(o.manifest);
        if (o.config) policy = synthesis_policy_from_json(read_json_file(*o.config));
        policy.validate();
        editor = make_editor(o.editor, o.editor_timeout);
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    if (manifest.cases.empty()) io.err << "warning: manifest " << o.manifest.string() << " has no cases\n";

    const json policy_json = synthesis_policy_to_json(policy);
    std::vector<std::string> ids;
    for (const auto& c : manifest.cases) ids.push_back(c.id);
    std::vector<detail::CaseOutcome> outcomes(ids.size());
    std::vector<std::vector<CaseEntry>> produced(ids.size());

    parallel_for(ids.size(), o.jobs, [&](std::size_t i) {
        const auto& c = manifest.cases[i];
        std::ostringstream failures;
        try {
            const SynthesisInputs in = load_synthesis_inputs(manifest, c);
            for (int k = 0; k < o.n_pairs; ++k) {
                const std::string name = "pair_" + std::to_string(k);
                try {
                    const std::uint64_t seed = pair_seed(o.seed, c.id, k);
                    Rng rng(seed);
                    const SyntheticPair pair = synthesize_pair(in.flair, in.lesion_mask, *editor, policy, in.priors(), rng);
                    const auto violations = validate_pair(pair);
                    if (!violations.empty()) throw DomainError("pair failed validation: " + violations.front());
                    write_pair(pair, o.out_dir / c.id / name,
                               {{"case_id", c.id}, {"pair_index", k}, {"seed", seed}, {"root_seed", o.seed},
                                {"editor", o.editor}, {"policy", policy_json}});
                    CaseEntry e;
                    e.id = c.id + "/" + name;
                    const std::string rel = c.id + "/" + name + "/";
                    e.roles = {{"t1", rel + "t1.nii.gz"}, {"t2", rel + "t2.nii.gz"}, {"gt", rel + "new_lesions.nii.gz"}};
                    produced[i].push_back(std::move(e));
                } catch (const EditorFailureError& e) {
                    failures << name << ": " << e.what();
                    if (!e.diagnostics().empty()) failures << "\n--- handler output ---\n" << e.diagnostics();
                    break;  // a failing editor fails the whole case
                }
            }
        } catch (const std::exception& e) {
            failures << e.what();
        }
        if (!failures.str().empty()) {
            outcomes[i] = {false, failures.str()};
            produced[i].clear();
        }
    });

    DatasetManifest out;
    for (auto& v : produced)
        for (auto& e : v) out.cases.push_back(std::move(e));
    std::filesystem::create_directories(o.out_dir);
    write_json_file(manifest_to_json(out), o.out_dir / "manifest.json");
    write_json_file({{"command", "synthesize"},
                     {"seed", o.seed},
                     {"n_pairs", o.n_pairs},
                     {"editor", o.editor},
                     {"policy", policy_json},
                     {"cases", ids}},
                    o.out_dir / "run.json");
    return detail::finish_cases(ids, outcomes, o.out_dir / "errors.log", io);
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
    std::vector<std::filesystem::path> manifests;
    std::optional<std::filesystem::path> config;
    std::filesystem::path report;
    unsigned jobs = default_jobs();
};

/// Method label for a prediction role: named predictions keep their name;
/// a plain `prediction` column takes the manifest's file stem when several
/// manifests are evaluated together.
inline std::string method_label(const std::string& name, const std::filesystem::path& manifest, bool several) {
    if (name != "prediction" || !several) return name;
    auto stem = manifest.filename().string();
    return stem.substr(0, stem.find('.'));
}

inline void print_score_table(std::ostream& out, const json& report) {
    std::size_t width = 6;
    for (const auto& [name, _] : report.at("methods").items()) width = std::max(width, name.size());
    auto pad = [&](std::string s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    out << pad("Method", width) << "  Avg. Score  DICE   LesF1  cases\n";
    for (const auto& [name, m] : report.at("methods").items()) {
        const auto& means = m.at("means");
        out << pad(name, width) << "  " << pad(format_score(means.at("avg_score").get<double>()), 10) << "  "
            << format_score(means.at("dice").get<double>()) << "  " << format_score(means.at("les_f1").get<double>())
            << "  " << m.at("cases").size() << '\n';
    }
}

inline int cmd_evaluate(const EvaluateOptions& o, CommandStreams io = {}) {
    DetectionThresholds th;
    std::vector<DatasetManifest> manifests;
    try {
        if (o.manifests.empty()) throw ParameterError("at least one manifest is required");
        for (const auto& p : o.manifests) manifests.push_back(load_manifest(p));
        if (o.config) th = thresholds_from_json(read_json_file(*o.config));
        th.validate();
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    struct Job {
        std::string method, case_id;
        std::filesystem::path pred, gt;
    };
    std::vector<Job> jobs;
    std::vector<std::string> missing;
    for (std::size_t mi = 0; mi < manifests.size(); ++mi) {
        const auto& m = manifests[mi];
        for (const auto& c : m.cases) {
            const auto gt = m.path_of(c, "gt");
            const auto preds = m.predictions_of(c);
            if (!gt || preds.empty()) {
                missing.push_back(c.id + ": needs gt and prediction entries");
                continue;
            }
            for (const auto& [name, path] : preds)
                jobs.push_back({method_label(name, o.manifests[mi], manifests.size() > 1), c.id, path, *gt});
        }
    }
    std::set<std::string> seen;
    for (const auto& j : jobs)
        if (!seen.insert(j.method + "\n" + j.case_id).second) {
            io.err << "error: case '" << j.case_id << "' appears twice for method '" << j.method << "'\n";
            return kExitUsage;
        }

    std::vector<std::optional<CaseReport>> reports(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), o.jobs, [&](std::size_t i) {
        const auto& j = jobs[i];
        try {
            if (!std::filesystem::exists(j.pred)) throw IoError("missing prediction " + j.pred.string());
            if (!std::filesystem::exists(j.gt)) throw IoError("missing gt " + j.gt.string());
            const BinaryMask gt = load_mask(j.gt);
            const BinaryMask pred = detail::conform(load_mask(j.pred), gt.geometry, "prediction");
            reports[i] = evaluate_case(pred, gt, th);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::map<std::string, std::vector<MethodCase>> methods;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (reports[i]) methods[jobs[i].method].push_back({jobs[i].case_id, *reports[i]});
        else missing.push_back(jobs[i].case_id + " (" + jobs[i].method + "): " + errors[i]);
    }
    json report = dataset_report(methods, th);
    report["manifests"] = json::array();
    for (const auto& p : o.manifests) report["manifests"].push_back(p.string());
    if (!missing.empty()) report["failed_cases"] = missing;
    if (o.report.has_parent_path()) std::filesystem::create_directories(o.report.parent_path());
    write_json_file(report, o.report);
    print_score_table(io.out, report);

    if (missing.empty()) return kExitOk;
    io.err << "error: " << missing.size() << " case(s) could not be evaluated:\n";
    for (const auto& s : missing) io.err << "  " << s << '\n';
    return kExitPartial;
}

// ---------------------------------------------------------------------------

struct CompareOptions {
    std::filesystem::path report_a, report_b;
    std::string metric = "avg_score";
    std::optional<std::string> method_a, method_b;
    double alpha = 0.05;
};

namespace detail {

inline const json& pick_method(const json& report, const std::optional<std::string>& name, const std::string& which) {
    const auto& methods = report.at("methods");
    if (name) {
        if (!methods.contains(*name)) throw ParameterError(which + ": no method '" + *name + "'");
        return methods.at(*name);
    }
    if (methods.size() != 1)
        throw ParameterError(which + ": report holds " + std::to_string(methods.size()) +
                             " methods; choose one with --method-a/--method-b");
    return methods.begin().value();
}

inline std::map<std::string, double> metric_by_case(const json& method, const std::string& metric) {
    std::map<std::string, double> out;
    for (const auto& c : method.at("cases")) out[c.at("id").get<std::string>()] = c.at(metric).get<double>();
    return out;
}

}  // namespace detail

inline int cmd_compare(const CompareOptions& o, CommandStreams io = {}) {
    std::map<std::string, double> a, b;
    try {
        if (std::find(comparable_metrics().begin(), comparable_metrics().end(), o.metric) == comparable_metrics().end())
            throw ParameterError("unknown metric '" + o.metric + "'");
        const json ra = read_json_file(o.report_a);
        const json rb = read_json_file(o.report_b);
        a = detail::metric_by_case(detail::pick_method(ra, o.method_a, "report A"), o.metric);
        b = detail::metric_by_case(detail::pick_method(rb, o.method_b, "report B"), o.metric);
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    std::vector<std::string> only;
    for (const auto& [id, _] : a)
        if (!b.count(id)) only.push_back(id + " (only in A)");
    for (const auto& [id, _] : b)
        if (!a.count(id)) only.push_back(id + " (only in B)");
    if (!only.empty() || a.empty()) {
        io.err << "error: reports do not share the same case ids";
        for (const auto& s : only) io.err << "\n  " << s;
        io.err << '\n';
        return kExitUsage;
    }
    std::vector<double> xa, xb;
    for (const auto& [id, v] : a) {
        xa.push_back(v);
        xb.push_back(b.at(id));
    }
    const auto w = wilcoxon_signed_rank(xa, xb);
    char line[128];
    std::snprintf(line, sizeof line, "metric=%s n=%zu W=%.1f p=%.6g (%s)\n", o.metric.c_str(), xa.size(), w.statistic,
                  w.p_value, w.exact ? "exact" : "normal approximation");
    io.out << line << (w.p_value < o.alpha ? "significant" : "not significant") << " at p < " << o.alpha << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct ConsensusOptions {
    std::vector<std::filesystem::path> maps;
    double threshold = 0.5;
    std::filesystem::path out;
};

inline int cmd_consensus(const ConsensusOptions& o, CommandStreams io = {}) {
    try {
        std::vector<Volume> maps;
        for (const auto& p : o.maps) {
            maps.push_back(load_volume(p));
            if (maps.size() > 1) maps.back() = detail::conform(std::move(maps.back()), maps.front().geometry, p.string());
        }
        const BinaryMask m = consensus(maps, o.threshold);
        if (o.out.has_parent_path()) std::filesystem::create_directories(o.out.parent_path());
        save_mask(m, o.out);
        io.out << "consensus of " << maps.size() << " map(s) at " << o.threshold << ": " << count_on(m)
               << " voxel(s) on\n";
        return kExitOk;
    } catch (const std::exception& e) {
        io.err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace lesionforge
