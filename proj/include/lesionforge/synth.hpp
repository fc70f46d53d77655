#pragma once

// Synthetic longitudinal pair generation from a single scan.
//
// Every lesion of the input is given a fate (kept in both time-points, or
// inpainted from t1, t2 or both). New lesions are then generated at sampled
// sites, either in t2 only or in both. The new-lesion ground truth is the
// union of lesions removed from t1 only and regions generated in t2 only.
//
// Lesion edits go through the LesionEditor interface; BaselineEditor is the
// non-learned implementation shipped here and ExternalEditor (see
// external_editor.hpp) hands edits to an out-of-process handler.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lesionforge/augment.hpp"
#include "lesionforge/components.hpp"
#include "lesionforge/filters.hpp"
#include "lesionforge/orientation.hpp"
#include "lesionforge/rng.hpp"
#include "lesionforge/volume.hpp"

namespace lesionforge {

/// Voxels an edit may touch beyond its region (chessboard distance).
inline constexpr int kBlendMargin = 2;

enum class LesionFate { keep_both = 0, remove_t1, remove_t2, remove_both };

inline constexpr std::array<const char*, 4> kFateNames{"keep_both", "remove_t1", "remove_t2", "remove_both"};

inline const char* fate_name(LesionFate f) { return kFateNames[static_cast<std::size_t>(f)]; }

inline LesionFate fate_from_name(const std::string& s) {
    for (std::size_t i = 0; i < kFateNames.size(); ++i)
        if (s == kFateNames[i]) return static_cast<LesionFate>(i);
    throw ParameterError("unknown lesion fate '" + s + "'");
}

enum class Placement { t2_only, both };

inline const char* placement_name(Placement p) { return p == Placement::t2_only ? "t2_only" : "both"; }

using FateLedger = std::map<std::int32_t, LesionFate>;

struct SynthesisPolicy {
    /// Indexed by LesionFate.
    std::array<double, 4> fate_probabilities{0.25, 0.25, 0.25, 0.25};
    IntRange generated_count{0, 3};
    double p_t2_only = 0.5;
    Range semi_axis_mm{1.5, 4.0};
    int max_site_attempts = 1000;
    bool flip_rotate = true;
    bool augment = true;
    SamplingPolicy augmentation{};
    Connectivity connectivity = Connectivity::vertex;

    /// Every lesion gets `f` and nothing is generated or augmented.
    static SynthesisPolicy forcing(LesionFate f) {
        SynthesisPolicy p;
        p.fate_probabilities = {0, 0, 0, 0};
        p.fate_probabilities[static_cast<std::size_t>(f)] = 1.0;
        p.generated_count = {0, 0};
        p.augment = false;
        p.flip_rotate = false;
        return p;
    }

    void validate() const {
        double sum = 0.0;
        for (double p : fate_probabilities) {
            if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("synthesis policy: fate probabilities must lie in [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("synthesis policy: fate probabilities must sum to 1");
        if (generated_count.lo < 0 || generated_count.lo > generated_count.hi)
            throw ParameterError("synthesis policy: invalid generated_count range");
        if (!(p_t2_only >= 0.0 && p_t2_only <= 1.0))
            throw ParameterError("synthesis policy: p_t2_only must lie in [0,1]");
        if (!(semi_axis_mm.lo > 0.0) || semi_axis_mm.lo > semi_axis_mm.hi || !std::isfinite(semi_axis_mm.hi))
            throw ParameterError("synthesis policy: invalid semi_axis_mm range");
        if (max_site_attempts < 1) throw ParameterError("synthesis policy: max_site_attempts must be >= 1");
        if (augment) validate_policy(augmentation);
    }
};

/// Independent draw per lesion label.
inline FateLedger assign_fates(const LabeledMask& l, const SynthesisPolicy& policy, Rng& rng) {
    policy.validate();
    FateLedger ledger;
    std::size_t fallback = 0;  // absorbs rounding when x lands past the cumulative sum
    for (std::size_t f = 0; f < 4; ++f)
        if (policy.fate_probabilities[f] > 0) fallback = f;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::int32_t label = 1; label <= l.count; ++label) {
        const double x = u(rng);
        double acc = 0.0;
        auto fate = static_cast<LesionFate>(fallback);
        for (std::size_t f = 0; f < 4; ++f) {
            acc += policy.fate_probabilities[f];
            if (policy.fate_probabilities[f] > 0 && x < acc) {
                fate = static_cast<LesionFate>(f);
                break;
            }
        }
        ledger[label] = fate;
    }
    return ledger;
}

// ---------------------------------------------------------------------------
// Generation sites

struct GenerationSite {
    BinaryMask region;
    Index3 center{};
    Vec3 semi_axes_mm{};
};

struct SiteSampling {
    std::vector<GenerationSite> sites;
    int shortfall = 0;  ///< requested sites that could not be placed
};

/// Axis-aligned ellipsoid voxels around `center`, or nullopt when it does not
/// fit inside the grid.
inline std::optional<BinaryMask> ellipsoid_region(const Geometry& g, const Index3& center, const Vec3& semi_axes_mm) {
    Index3 ext{};
    for (std::size_t a = 0; a < 3; ++a) {
        ext[a] = static_cast<std::int64_t>(std::floor(semi_axes_mm[a] / g.spacing[a]));
        if (center[a] - ext[a] < 0 || center[a] + ext[a] >= g.dims[a]) return std::nullopt;
    }
    BinaryMask m(g);
    for (std::int64_t dz = -ext[2]; dz <= ext[2]; ++dz)
        for (std::int64_t dy = -ext[1]; dy <= ext[1]; ++dy)
            for (std::int64_t dx = -ext[0]; dx <= ext[0]; ++dx) {
                const double rx = static_cast<double>(dx) * g.spacing[0] / semi_axes_mm[0];
                const double ry = static_cast<double>(dy) * g.spacing[1] / semi_axes_mm[1];
                const double rz = static_cast<double>(dz) * g.spacing[2] / semi_axes_mm[2];
                if (rx * rx + ry * ry + rz * rz <= 1.0) m.at(center[0] + dx, center[1] + dy, center[2] + dz) = 1;
            }
    return m;
}

/// Draws up to `n` ellipsoidal sites. Centres are drawn with probability
/// proportional to atlas x wm_mask (either may be absent, meaning uniform /
/// everywhere). Sites stay inside the grid and overlap neither `exclusion`
/// nor each other; a site is abandoned after `max_attempts` rejections.
inline SiteSampling sample_generation_sites(const Volume* atlas, const BinaryMask* wm_mask, const BinaryMask& exclusion,
                                            int n, const Range& semi_axis_mm, Rng& rng, int max_attempts = 1000) {
    if (n < 0) throw DomainError("sample_generation_sites: n must be >= 0");
    const Geometry& g = exclusion.geometry;
    if (atlas) require_same_geometry(*atlas, exclusion, "sample_generation_sites");
    if (wm_mask) require_same_geometry(*wm_mask, exclusion, "sample_generation_sites");
    SiteSampling out;
    if (n == 0) return out;

    std::vector<std::size_t> support;
    std::vector<double> cumulative;
    double total = 0.0;
    for (std::size_t i = 0; i < exclusion.size(); ++i) {
        double w = 1.0;
        if (atlas) {
            const double a = (*atlas)[i];
            if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("sample_generation_sites: atlas values must be finite and >= 0");
            w = a;
        }
        if (wm_mask && !(*wm_mask)[i]) w = 0.0;
        if (w > 0.0) {
            total += w;
            support.push_back(i);
            cumulative.push_back(total);
        }
    }
    if (support.empty()) throw NoValidSiteError("sample_generation_sites: atlas is zero everywhere inside the white-matter mask");

    std::uniform_real_distribution<double> u(0.0, total);
    std::uniform_real_distribution<double> axis_len(semi_axis_mm.lo, semi_axis_mm.hi);
    BinaryMask occupied = exclusion;
    for (int s = 0; s < n; ++s) {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            const double x = u(rng);
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
            if (it == cumulative.end()) --it;
            const std::size_t idx = support[static_cast<std::size_t>(it - cumulative.begin())];
            Vec3 axes;
            for (auto& a : axes) a = semi_axis_mm.lo == semi_axis_mm.hi ? semi_axis_mm.lo : axis_len(rng);
            const Index3 c = g.coords(idx);
            auto region = ellipsoid_region(g, c, axes);
            if (!region || masks_intersect(*region, occupied)) continue;
            for (std::size_t i = 0; i < occupied.size(); ++i)
                if ((*region)[i]) occupied[i] = 1;
            out.sites.push_back({std::move(*region), c, axes});
            placed = true;
        }
        if (!placed) ++out.shortfall;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Editors

/// Replaces (inpaint) or creates (generate) lesion tissue inside `region`.
/// Implementations may only change voxels within kBlendMargin of the region.
/// `context_exclusion` marks voxels (other lesions) that must not be used as
/// healthy context.
class LesionEditor {
public:
    virtual ~LesionEditor() = default;
    virtual Volume inpaint(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                           std::uint64_t seed) const = 0;
    virtual Volume generate(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                            std::uint64_t seed) const = 0;
};

namespace detail {

struct Box {
    Index3 lo{};
    Index3 hi{};  ///< exclusive
};

inline Box region_box(const BinaryMask& region, std::int64_t pad) {
    const auto& d = region.geometry.dims;
    Box b{{d[0], d[1], d[2]}, {0, 0, 0}};
    bool any = false;
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (!region[i]) continue;
        any = true;
        const auto c = region.geometry.coords(i);
        for (std::size_t a = 0; a < 3; ++a) {
            b.lo[a] = std::min(b.lo[a], c[a]);
            b.hi[a] = std::max(b.hi[a], c[a] + 1);
        }
    }
    if (!any) throw DomainError("editor: region is empty");
    for (std::size_t a = 0; a < 3; ++a) {
        b.lo[a] = std::max<std::int64_t>(0, b.lo[a] - pad);
        b.hi[a] = std::min<std::int64_t>(d[a], b.hi[a] + pad);
    }
    return b;
}

template <typename T>
Grid<T> crop(const Grid<T>& src, const Box& b) {
    const Geometry g = Geometry::from_spacing({b.hi[0] - b.lo[0], b.hi[1] - b.lo[1], b.hi[2] - b.lo[2]},
                                              src.geometry.spacing);
    Grid<T> out(g);
    std::size_t o = 0;
    for (std::int64_t z = b.lo[2]; z < b.hi[2]; ++z)
        for (std::int64_t y = b.lo[1]; y < b.hi[1]; ++y)
            for (std::int64_t x = b.lo[0]; x < b.hi[0]; ++x) out.data[o++] = src.at(x, y, z);
    return out;
}

template <typename T>
void paste(Grid<T>& dst, const Grid<T>& src, const Box& b) {
    std::size_t o = 0;
    for (std::int64_t z = b.lo[2]; z < b.hi[2]; ++z)
        for (std::int64_t y = b.lo[1]; y < b.hi[1]; ++y)
            for (std::int64_t x = b.lo[0]; x < b.hi[0]; ++x) dst.at(x, y, z) = src.data[o++];
}

/// Weight 1 inside the region, 1 - d/(margin+1) at chessboard distance
/// d <= margin, 0 beyond.
inline std::vector<double> blend_weights(const BinaryMask& region, int margin) {
    std::vector<double> w(region.size(), 0.0);
    BinaryMask shell = region;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i]) w[i] = 1.0;
    for (int d = 1; d <= margin; ++d) {
        BinaryMask grown = dilate(shell, 1);
        const double value = 1.0 - static_cast<double>(d) / (margin + 1);
        for (std::size_t i = 0; i < region.size(); ++i)
            if (grown[i] && !shell[i]) w[i] = value;
        shell = std::move(grown);
    }
    return w;
}

struct RingStats {
    double mean = 0.0;
    double sd = 0.0;
};

/// Intensity statistics of the 3-voxel shell around the region, ignoring
/// excluded voxels.
inline RingStats ring_stats(const Volume& v, const BinaryMask& region, const BinaryMask& exclusion) {
    const BinaryMask grown = dilate(region, 3);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!grown[i] || region[i] || exclusion[i]) continue;
        sum += v[i];
        sq += v[i] * v[i];
        ++n;
    }
    if (n == 0) throw InsufficientContextError("editor: no healthy voxels around the region");
    RingStats s;
    s.mean = sum / static_cast<double>(n);
    s.sd = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - s.mean * s.mean));
    return s;
}

inline constexpr std::int64_t kEditPad = 8;
inline constexpr double kInpaintSmoothingSd = 0.8;

inline void check_edit_inputs(const Volume& v, const BinaryMask& region, const BinaryMask* exclusion) {
    require_same_geometry(v, region, "editor");
    if (exclusion && !exclusion->data.empty()) require_same_geometry(v, *exclusion, "editor");
}

}  // namespace detail

/// Fills the region with Gaussian samples matching the surrounding ring,
/// smooths (sd 0.8 voxels) and blends over kBlendMargin voxels.
inline Volume baseline_inpaint(const Volume& v, const BinaryMask& region, std::uint64_t seed,
                               const BinaryMask& context_exclusion = {}) {
    detail::check_edit_inputs(v, region, &context_exclusion);
    const auto box = detail::region_box(region, detail::kEditPad);
    const Volume cv = detail::crop(v, box);
    const BinaryMask cr = detail::crop(region, box);
    const BinaryMask ce = context_exclusion.data.empty() ? BinaryMask(cv.geometry) : detail::crop(context_exclusion, box);
    const auto stats = detail::ring_stats(cv, cr, ce);

    Rng rng(seed);
    Volume filled = cv;
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (cr[i]) filled[i] = stats.sd > 0.0 ? stats.mean + stats.sd * noise(rng) : stats.mean;
    const Volume smooth = gaussian_blur(filled, detail::kInpaintSmoothingSd);
    const auto w = detail::blend_weights(cr, kBlendMargin);

    Volume edited = cv;
    for (std::size_t i = 0; i < edited.size(); ++i) {
        if (w[i] == 1.0) edited[i] = smooth[i];
        else if (w[i] > 0.0) edited[i] = w[i] * smooth[i] + (1.0 - w[i]) * cv[i];
    }
    Volume out = v;
    detail::paste(out, edited, box);
    return out;
}

/// Raises the region toward ring_mean x U[1.2, 1.8] with a smooth falloff
/// over kBlendMargin voxels.
inline Volume baseline_generate(const Volume& v, const BinaryMask& region, std::uint64_t seed,
                                const BinaryMask& context_exclusion = {}) {
    detail::check_edit_inputs(v, region, &context_exclusion);
    const auto box = detail::region_box(region, detail::kEditPad);
    const Volume cv = detail::crop(v, box);
    const BinaryMask cr = detail::crop(region, box);
    const BinaryMask ce = context_exclusion.data.empty() ? BinaryMask(cv.geometry) : detail::crop(context_exclusion, box);
    const auto stats = detail::ring_stats(cv, cr, ce);

    Rng rng(seed);
    const double factor = std::uniform_real_distribution<double>(1.2, 1.8)(rng);
    const double target = stats.mean > 0.0 ? stats.mean * factor
                                            : stats.mean + (factor - 1.0) * std::max(stats.sd, 1.0);
    const double texture = 0.05 * std::abs(target - stats.mean);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto w = detail::blend_weights(cr, kBlendMargin);

    Volume edited = cv;
    for (std::size_t i = 0; i < edited.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double lesion = cr[i] ? target + texture * noise(rng) : target;
        edited[i] = w[i] == 1.0 ? lesion : w[i] * lesion + (1.0 - w[i]) * cv[i];
    }
    Volume out = v;
    detail::paste(out, edited, box);
    return out;
}

class BaselineEditor final : public LesionEditor {
public:
    Volume inpaint(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                   std::uint64_t seed) const override {
        return baseline_inpaint(v, region, seed, context_exclusion);
    }
    Volume generate(const Volume& v, const BinaryMask& region, const BinaryMask& context_exclusion,
                    std::uint64_t seed) const override {
        return baseline_generate(v, region, seed, context_exclusion);
    }
};

/// Copies `original` back over every voxel the edit was not allowed to touch.
inline Volume confine_edit(const Volume& original, Volume edited, const BinaryMask& region) {
    require_same_geometry(original, edited, "editor output");
    const BinaryMask allowed = dilate(region, kBlendMargin);
    for (std::size_t i = 0; i < edited.size(); ++i)
        if (!allowed[i]) edited[i] = original[i];
    return edited;
}

// ---------------------------------------------------------------------------
// Pair synthesis

struct GeneratedRegion {
    BinaryMask mask;
    Placement placement = Placement::t2_only;
    Index3 center{};
    Vec3 semi_axes_mm{};
};

struct SyntheticPair {
    Volume t1;
    Volume t2;
    BinaryMask new_lesion_mask;
    LabeledMask lesions;  ///< input lesions after reorientation
    FateLedger fate_ledger;
    std::vector<GeneratedRegion> generated_regions;
    AugmentationPlan plan1;
    AugmentationPlan plan2;
    OrthoTransform orientation;
    int site_shortfall = 0;
};

/// Optional spatial priors for lesion placement.
struct PlacementPriors {
    const Volume* atlas = nullptr;
    const BinaryMask* wm_mask = nullptr;
};

inline SyntheticPair synthesize_pair(const Volume& patch, const BinaryMask& lesion_mask, const LesionEditor& editor,
                                     const SynthesisPolicy& policy, PlacementPriors priors, Rng& rng) {
    patch.validate();
    require_finite(patch, "synthesize_pair");
    require_same_geometry(patch, lesion_mask, "synthesize_pair");
    if (priors.atlas) require_same_geometry(patch, *priors.atlas, "synthesize_pair atlas");
    if (priors.wm_mask) require_same_geometry(patch, *priors.wm_mask, "synthesize_pair wm_mask");
    policy.validate();

    SyntheticPair pair;

    // Step 1: joint reorientation, duplication, independent degradation.
    Volume base = patch;
    BinaryMask lesions = lesion_mask;
    std::optional<Volume> atlas;
    std::optional<BinaryMask> wm;
    if (priors.atlas) atlas = *priors.atlas;
    if (priors.wm_mask) wm = *priors.wm_mask;
    if (policy.flip_rotate) {
        pair.orientation = sample_ortho_transform(rng);
        base = pair.orientation.apply(base);
        lesions = pair.orientation.apply(lesions);
        if (atlas) atlas = pair.orientation.apply(*atlas);
        if (wm) wm = pair.orientation.apply(*wm);
    }
    pair.t1 = base;
    pair.t2 = base;
    if (policy.augment) {
        pair.plan1 = sample_plan(policy.augmentation, rng);
        pair.plan2 = sample_plan(policy.augmentation, rng);
        pair.t1 = apply_plan(pair.t1, pair.plan1);
        pair.t2 = apply_plan(pair.t2, pair.plan2);
    }

    // Step 2: per-lesion fates and inpainting.
    pair.lesions = connected_components(lesions, policy.connectivity);
    pair.fate_ledger = assign_fates(pair.lesions, policy, rng);
    pair.new_lesion_mask = empty_mask_like(base.geometry);
    for (const auto& [label, fate] : pair.fate_ledger) {
        const std::uint64_t seed1 = rng(), seed2 = rng();
        if (fate == LesionFate::keep_both) continue;
        const BinaryMask comp = component_mask(pair.lesions, label);
        if (fate == LesionFate::remove_t1 || fate == LesionFate::remove_both)
            pair.t1 = confine_edit(pair.t1, editor.inpaint(pair.t1, comp, lesions, seed1), comp);
        if (fate == LesionFate::remove_t2 || fate == LesionFate::remove_both)
            pair.t2 = confine_edit(pair.t2, editor.inpaint(pair.t2, comp, lesions, seed2), comp);
        if (fate == LesionFate::remove_t1)
            for (std::size_t i = 0; i < comp.size(); ++i)
                if (comp[i]) pair.new_lesion_mask[i] = 1;
    }

    // Step 3: generated lesions.
    const int n = std::uniform_int_distribution<int>(policy.generated_count.lo, policy.generated_count.hi)(rng);
    if (n > 0) {
        auto sites = sample_generation_sites(atlas ? &*atlas : nullptr, wm ? &*wm : nullptr, lesions, n,
                                             policy.semi_axis_mm, rng, policy.max_site_attempts);
        pair.site_shortfall = sites.shortfall;
        BinaryMask context = lesions;
        for (const auto& s : sites.sites)
            for (std::size_t i = 0; i < context.size(); ++i)
                if (s.region[i]) context[i] = 1;
        std::bernoulli_distribution t2_only(policy.p_t2_only);
        for (auto& s : sites.sites) {
            GeneratedRegion g;
            g.placement = t2_only(rng) ? Placement::t2_only : Placement::both;
            const std::uint64_t seed1 = rng(), seed2 = rng();
            pair.t2 = confine_edit(pair.t2, editor.generate(pair.t2, s.region, context, seed2), s.region);
            if (g.placement == Placement::both)
                pair.t1 = confine_edit(pair.t1, editor.generate(pair.t1, s.region, context, seed1), s.region);
            else
                for (std::size_t i = 0; i < s.region.size(); ++i)
                    if (s.region[i]) pair.new_lesion_mask[i] = 1;
            g.mask = std::move(s.region);
            g.center = s.center;
            g.semi_axes_mm = s.semi_axes_mm;
            pair.generated_regions.push_back(std::move(g));
        }
    }
    return pair;
}

/// Checks the new-lesion mask algebra and geometry consistency. Returns one
/// message per violation; empty means valid.
inline std::vector<std::string> validate_pair(const SyntheticPair& p) {
    std::vector<std::string> errors;
    const auto& g = p.t1.geometry;
    if (!g.same_as(p.t2.geometry)) errors.push_back("t1/t2 geometry differs");
    if (!g.same_as(p.new_lesion_mask.geometry)) errors.push_back("new-lesion mask geometry differs");
    if (!g.same_as(p.lesions.geometry())) errors.push_back("lesion labels geometry differs");
    if (!errors.empty()) return errors;

    BinaryMask expected(g), forbidden(g);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto label = p.lesions.labels[i];
        if (label == 0) continue;
        const auto it = p.fate_ledger.find(label);
        if (it == p.fate_ledger.end()) {
            errors.push_back("lesion " + std::to_string(label) + " has no fate");
            return errors;
        }
        (it->second == LesionFate::remove_t1 ? expected : forbidden)[i] = 1;
    }
    for (std::size_t r = 0; r < p.generated_regions.size(); ++r) {
        const auto& gr = p.generated_regions[r];
        if (!gr.mask.geometry.same_as(g)) {
            errors.push_back("generated region geometry differs");
            continue;
        }
        for (std::size_t i = 0; i < gr.mask.size(); ++i)
            if (gr.mask[i]) {
                if (p.lesions.labels[i] != 0) {
                    errors.push_back("generated region " + std::to_string(r) + " overlaps an original lesion");
                    break;
                }
                (gr.placement == Placement::t2_only ? expected : forbidden)[i] = 1;
            }
        for (std::size_t q = r + 1; q < p.generated_regions.size(); ++q)
            if (p.generated_regions[q].mask.geometry.same_as(g) && masks_intersect(gr.mask, p.generated_regions[q].mask))
                errors.push_back("generated regions " + std::to_string(r) + " and " + std::to_string(q) + " overlap");
    }
    if (expected.data != p.new_lesion_mask.data) errors.push_back("new-lesion mask differs from the fate/placement union");
    if (masks_intersect(p.new_lesion_mask, forbidden))
        errors.push_back("new-lesion mask intersects kept, t2-removed or both-placed tissue");
    return errors;
}

/// With augmentation disabled, t1 and t2 may only differ inside edited
/// regions grown by kBlendMargin. Returns the number of offending voxels.
inline std::size_t locality_violations(const SyntheticPair& p) {
    BinaryMask edited(p.t1.geometry);
    for (std::size_t i = 0; i < edited.size(); ++i) {
        const auto label = p.lesions.labels[i];
        if (label != 0 && p.fate_ledger.at(label) != LesionFate::keep_both) edited[i] = 1;
    }
    for (const auto& gr : p.generated_regions)
        for (std::size_t i = 0; i < edited.size(); ++i)
            if (gr.mask[i]) edited[i] = 1;
    const BinaryMask allowed = dilate(edited, kBlendMargin);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < allowed.size(); ++i)
        if (!allowed[i] && p.t1[i] != p.t2[i]) ++bad;
    return bad;
}

}  // namespace lesionforge
