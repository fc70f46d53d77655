#pragma once

// JSON forms of SamplingPolicy and AugmentationPlan.
//
// Policy files are partial: any key left out keeps its default. Unknown keys
// are rejected so that typos do not silently fall back to defaults.

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "lesionforge/augment.hpp"

namespace lesionforge {

using json = nlohmann::json;

// --- plan -----------------------------------------------------------------

inline json artifact_to_json(const ArtifactSpec& spec) {
    json j;
    j["type"] = artifact_name(spec);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Blur> || std::is_same_v<T, EdgeEnhance>) {
                j["sd"] = s.sd;
            } else if constexpr (std::is_same_v<T, AxialMeanFilter>) {
                j["size"] = s.size;
            } else if constexpr (std::is_same_v<T, AnisoDownsample>) {
                j["axis"] = s.axis;
                j["factor"] = s.factor;
            } else if constexpr (std::is_same_v<T, GaussianNoise>) {
                j["sd"] = s.sd;
                j["relative"] = s.relative;
            } else if constexpr (std::is_same_v<T, BiasField>) {
                j["order"] = s.order;
                j["coefficients"] = s.coefficients;
            } else if constexpr (std::is_same_v<T, Motion>) {
                j["phase_axis"] = s.phase_axis;
                j["transforms"] = json::array();
                for (const auto& t : s.transforms)
                    j["transforms"].push_back({{"rotation_deg", t.rotation_deg}, {"translation_mm", t.translation_mm}});
            } else if constexpr (std::is_same_v<T, Spike>) {
                j["positions"] = s.positions;
                j["intensity_factor"] = s.intensity_factor;
            } else {
                j["n_ghosts"] = s.n_ghosts;
                j["axis"] = s.axis;
                j["intensity"] = s.intensity;
            }
        },
        spec);
    return j;
}

inline ArtifactSpec artifact_from_json(const json& j) {
    switch (artifact_kind_from_name(j.at("type").get<std::string>())) {
        case ArtifactKind::blur: return Blur{j.at("sd").get<double>()};
        case ArtifactKind::edge_enhance: return EdgeEnhance{j.at("sd").get<double>()};
        case ArtifactKind::axial_mean_filter: return AxialMeanFilter{j.at("size").get<int>()};
        case ArtifactKind::aniso_downsample: return AnisoDownsample{j.at("axis").get<int>(), j.at("factor").get<double>()};
        case ArtifactKind::gaussian_noise: return GaussianNoise{j.at("sd").get<double>(), j.value("relative", true)};
        case ArtifactKind::bias_field:
            return BiasField{j.at("order").get<int>(), j.at("coefficients").get<std::vector<double>>()};
        case ArtifactKind::motion: {
            Motion m;
            m.phase_axis = j.at("phase_axis").get<int>();
            for (const auto& t : j.at("transforms"))
                m.transforms.push_back({t.at("rotation_deg").get<Vec3>(), t.at("translation_mm").get<Vec3>()});
            return m;
        }
        case ArtifactKind::spike:
            return Spike{j.at("positions").get<std::vector<Vec3>>(), j.at("intensity_factor").get<double>()};
        case ArtifactKind::ghosting:
            return Ghosting{j.at("n_ghosts").get<int>(), j.at("axis").get<int>(), j.at("intensity").get<double>()};
    }
    throw ParameterError("unknown artifact");
}

inline json plan_to_json(const AugmentationPlan& plan) {
    json j;
    j["seed"] = plan.rng_seed;
    j["artifacts"] = json::array();
    for (const auto& a : plan.artifacts) j["artifacts"].push_back(artifact_to_json(a));
    return j;
}

inline AugmentationPlan plan_from_json(const json& j) {
    AugmentationPlan plan;
    plan.rng_seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("artifacts")) plan.artifacts.push_back(artifact_from_json(a));
    return plan;
}

// --- policy ---------------------------------------------------------------

namespace detail {

inline json range_json(const Range& r) { return json::array({r.lo, r.hi}); }
inline json range_json(const IntRange& r) { return json::array({r.lo, r.hi}); }

inline void read_range(const json& j, const char* key, Range& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ParameterError(std::string("policy: '") + key + "' must be [lo, hi]");
    r = {a[0].get<double>(), a[1].get<double>()};
}

inline void read_range(const json& j, const char* key, IntRange& r) {
    if (!j.contains(key)) return;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ParameterError(std::string("policy: '") + key + "' must be [lo, hi]");
    r = {a[0].get<int>(), a[1].get<int>()};
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ParameterError("policy: '" + where + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!ok.count(k)) throw ParameterError("policy: unknown key '" + k + "' in " + where);
}

}  // namespace detail

inline json policy_to_json(const SamplingPolicy& p) {
    using detail::range_json;
    json a;
    auto entry = [&](ArtifactKind k, json extra) {
        extra["enabled"] = p.toggle(k).enabled;
        extra["probability"] = p.toggle(k).probability;
        a[artifact_name(k)] = std::move(extra);
    };
    entry(ArtifactKind::blur, {{"sd", range_json(p.blur_sd)}});
    entry(ArtifactKind::edge_enhance, {{"sd", range_json(p.edge_sd)}});
    entry(ArtifactKind::axial_mean_filter, {{"size", range_json(p.axial_size)}});
    entry(ArtifactKind::aniso_downsample, {{"factor", range_json(p.downsample_factor)}});
    entry(ArtifactKind::gaussian_noise, {{"sd", range_json(p.noise_sd)}, {"relative", p.noise_relative}});
    entry(ArtifactKind::bias_field, {{"order", p.bias_order}, {"coefficient", range_json(p.bias_coefficient)}});
    entry(ArtifactKind::motion, {{"transforms", range_json(p.motion_transforms)},
                                 {"rotation_deg", range_json(p.motion_rotation_deg)},
                                 {"translation_mm", range_json(p.motion_translation_mm)}});
    entry(ArtifactKind::spike, {{"count", range_json(p.spike_count)},
                                {"intensity", range_json(p.spike_intensity)},
                                {"dc_exclusion", p.spike_dc_exclusion}});
    entry(ArtifactKind::ghosting, {{"ghosts", range_json(p.ghost_count)}, {"intensity", range_json(p.ghost_intensity)}});
    return {{"mode", p.mode == SamplingMode::one_of ? "one-of" : "independent"}, {"artifacts", a}};
}

/// Overlays `j` on the default policy and validates the result.
inline SamplingPolicy policy_from_json(const json& j) {
    using detail::read_range;
    using detail::reject_unknown;
    SamplingPolicy p;
    reject_unknown(j, {"mode", "artifacts"}, "policy");
    if (j.contains("mode")) {
        const auto m = j.at("mode").get<std::string>();
        if (m == "one-of") p.mode = SamplingMode::one_of;
        else if (m == "independent") p.mode = SamplingMode::independent;
        else throw ParameterError("policy: mode must be 'one-of' or 'independent'");
    }
    if (j.contains("artifacts")) {
        const auto& arts = j.at("artifacts");
        if (!arts.is_object()) throw ParameterError("policy: 'artifacts' must be an object");
        for (const auto& [name, cfg] : arts.items()) {
            const auto k = artifact_kind_from_name(name);
            auto& t = p.toggle(k);
            t.enabled = cfg.value("enabled", t.enabled);
            t.probability = cfg.value("probability", t.probability);
            switch (k) {
                case ArtifactKind::blur:
                    reject_unknown(cfg, {"enabled", "probability", "sd"}, name);
                    read_range(cfg, "sd", p.blur_sd);
                    break;
                case ArtifactKind::edge_enhance:
                    reject_unknown(cfg, {"enabled", "probability", "sd"}, name);
                    read_range(cfg, "sd", p.edge_sd);
                    break;
                case ArtifactKind::axial_mean_filter:
                    reject_unknown(cfg, {"enabled", "probability", "size"}, name);
                    read_range(cfg, "size", p.axial_size);
                    break;
                case ArtifactKind::aniso_downsample:
                    reject_unknown(cfg, {"enabled", "probability", "factor"}, name);
                    read_range(cfg, "factor", p.downsample_factor);
                    break;
                case ArtifactKind::gaussian_noise:
                    reject_unknown(cfg, {"enabled", "probability", "sd", "relative"}, name);
                    read_range(cfg, "sd", p.noise_sd);
                    p.noise_relative = cfg.value("relative", p.noise_relative);
                    break;
                case ArtifactKind::bias_field:
                    reject_unknown(cfg, {"enabled", "probability", "order", "coefficient"}, name);
                    p.bias_order = cfg.value("order", p.bias_order);
                    read_range(cfg, "coefficient", p.bias_coefficient);
                    break;
                case ArtifactKind::motion:
                    reject_unknown(cfg, {"enabled", "probability", "transforms", "rotation_deg", "translation_mm"}, name);
                    read_range(cfg, "transforms", p.motion_transforms);
                    read_range(cfg, "rotation_deg", p.motion_rotation_deg);
                    read_range(cfg, "translation_mm", p.motion_translation_mm);
                    break;
                case ArtifactKind::spike:
                    reject_unknown(cfg, {"enabled", "probability", "count", "intensity", "dc_exclusion"}, name);
                    read_range(cfg, "count", p.spike_count);
                    read_range(cfg, "intensity", p.spike_intensity);
                    p.spike_dc_exclusion = cfg.value("dc_exclusion", p.spike_dc_exclusion);
                    break;
                case ArtifactKind::ghosting:
                    reject_unknown(cfg, {"enabled", "probability", "ghosts", "intensity"}, name);
                    read_range(cfg, "ghosts", p.ghost_count);
                    read_range(cfg, "intensity", p.ghost_intensity);
                    break;
            }
        }
    }
    validate_policy(p);
    return p;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParameterError("cannot parse " + path.string() + ": " + e.what());
    }
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lesionforge
