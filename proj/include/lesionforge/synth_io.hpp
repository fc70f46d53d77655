#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "lesionforge/augment_io.hpp"
#include "lesionforge/nifti.hpp"
#include "lesionforge/synth.hpp"

namespace lesionforge {

inline json synthesis_policy_to_json(const SynthesisPolicy& p) {
    json fates;
    for (std::size_t f = 0; f < 4; ++f) fates[kFateNames[f]] = p.fate_probabilities[f];
    return {{"fate_probabilities", fates},
            {"generated_count", {p.generated_count.lo, p.generated_count.hi}},
            {"p_t2_only", p.p_t2_only},
            {"semi_axis_mm", {p.semi_axis_mm.lo, p.semi_axis_mm.hi}},
            {"max_site_attempts", p.max_site_attempts},
            {"flip_rotate", p.flip_rotate},
            {"augment", p.augment},
            {"augmentation", policy_to_json(p.augmentation)},
            {"connectivity", static_cast<int>(p.connectivity)}};
}

/// Overlays `j` on the default synthesis policy.
inline SynthesisPolicy synthesis_policy_from_json(const json& j) {
    detail::reject_unknown(j,
                           {"fate_probabilities", "generated_count", "p_t2_only", "semi_axis_mm", "max_site_attempts",
                            "flip_rotate", "augment", "augmentation", "connectivity"},
                           "synthesis policy");
    SynthesisPolicy p;
    if (j.contains("fate_probabilities")) {
        const auto& f = j.at("fate_probabilities");
        detail::reject_unknown(f, {"keep_both", "remove_t1", "remove_t2", "remove_both"}, "fate_probabilities");
        p.fate_probabilities = {0, 0, 0, 0};
        for (const auto& [name, value] : f.items())
            p.fate_probabilities[static_cast<std::size_t>(fate_from_name(name))] = value.get<double>();
    }
    detail::read_range(j, "generated_count", p.generated_count);
    detail::read_range(j, "semi_axis_mm", p.semi_axis_mm);
    p.p_t2_only = j.value("p_t2_only", p.p_t2_only);
    p.max_site_attempts = j.value("max_site_attempts", p.max_site_attempts);
    p.flip_rotate = j.value("flip_rotate", p.flip_rotate);
    p.augment = j.value("augment", p.augment);
    if (j.contains("augmentation")) p.augmentation = policy_from_json(j.at("augmentation"));
    if (j.contains("connectivity")) p.connectivity = connectivity_from_int(j.at("connectivity").get<int>());
    p.validate();
    return p;
}

inline json orientation_to_json(const OrthoTransform& t) {
    return {{"index", t.index()}, {"perm", t.perm}, {"flip", t.flip}};
}

/// Everything needed to audit (and, with the seed, replay) a pair.
inline json pair_provenance(const SyntheticPair& p) {
    json fates = json::object();
    for (const auto& [label, fate] : p.fate_ledger) fates[std::to_string(label)] = fate_name(fate);
    json generated = json::array();
    for (const auto& g : p.generated_regions)
        generated.push_back({{"placement", placement_name(g.placement)},
                             {"center", g.center},
                             {"semi_axes_mm", g.semi_axes_mm},
                             {"voxels", count_on(g.mask)}});
    return {{"orientation", orientation_to_json(p.orientation)},
            {"lesion_count", p.lesions.count},
            {"fates", fates},
            {"generated", generated},
            {"site_shortfall", p.site_shortfall},
            {"new_lesion_voxels", count_on(p.new_lesion_mask)},
            {"plan1", plan_to_json(p.plan1)},
            {"plan2", plan_to_json(p.plan2)}};
}

/// Writes t1.nii.gz, t2.nii.gz, new_lesions.nii.gz and provenance.json.
/// `extra` is merged into the provenance object.
inline void write_pair(const SyntheticPair& p, const std::filesystem::path& dir, const json& extra = json::object()) {
    std::filesystem::create_directories(dir);
    save_volume(p.t1, dir / "t1.nii.gz", NiftiType::float32);
    save_volume(p.t2, dir / "t2.nii.gz", NiftiType::float32);
    save_mask(p.new_lesion_mask, dir / "new_lesions.nii.gz");
    json prov = pair_provenance(p);
    for (const auto& [k, v] : extra.items()) prov[k] = v;
    write_json_file(prov, dir / "provenance.json");
}

}  // namespace lesionforge
