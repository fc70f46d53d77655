#pragma once

// Image-quality artifact simulation.
//
// Nine artifact families, each a plain struct gathered into the ArtifactSpec
// variant. A SamplingPolicy describes how specs are drawn; an
// AugmentationPlan is an ordered list of concrete specs plus the seed that
// drives any randomness consumed while applying them (only GaussianNoise
// draws from it). Applying the same plan to the same volume is
// bit-reproducible.
//
// The k-space artifacts (Motion, Spike, Ghosting) reconstruct with the
// magnitude of the inverse transform, so their output is non-negative.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "lesionforge/fft.hpp"
#include "lesionforge/filters.hpp"
#include "lesionforge/orientation.hpp"
#include "lesionforge/rng.hpp"
#include "lesionforge/volume.hpp"

namespace lesionforge {

/// Axis treated as the slice (axial) direction.
inline constexpr int kAxialAxis = 2;

struct Blur {
    double sd = 1.0;  ///< voxels
    bool operator==(const Blur&) const = default;
};

/// Unsharp masking: out = v + (v - blur_sd(v)).
struct EdgeEnhance {
    double sd = 1.0;
    bool operator==(const EdgeEnhance&) const = default;
};

/// 1 x 1 x size box mean along the axial axis.
struct AxialMeanFilter {
    int size = 2;
    bool operator==(const AxialMeanFilter&) const = default;
};

/// Box-average downsample along `axis`, cubic B-spline upsample back.
struct AnisoDownsample {
    int axis = 2;
    double factor = 2.0;
    bool operator==(const AnisoDownsample&) const = default;
};

/// Zero-mean additive noise. With `relative`, sd is a fraction of the
/// robust intensity range p99 - p1.
struct GaussianNoise {
    double sd = 0.05;
    bool relative = true;
    bool operator==(const GaussianNoise&) const = default;
};

/// Multiplicative field exp(sum_i c_i x^a y^b z^c) over coordinates in [-1,1]^3.
/// Coefficients are ordered by (a, b, c) with a outermost and a+b+c <= order.
struct BiasField {
    int order = 3;
    std::vector<double> coefficients;
    bool operator==(const BiasField&) const = default;
};

struct RigidMotion {
    Vec3 rotation_deg{0.0, 0.0, 0.0};
    Vec3 translation_mm{0.0, 0.0, 0.0};
    bool operator==(const RigidMotion&) const = default;
};

/// K-space is split into |transforms| contiguous slabs along phase_axis;
/// slab t is acquired from the volume moved by transforms[t].
struct Motion {
    std::vector<RigidMotion> transforms;
    int phase_axis = 1;
    bool operator==(const Motion&) const = default;
};

/// Positions are normalized k-space coordinates in [-0.5, 0.5)^3 (DC at 0).
struct Spike {
    std::vector<Vec3> positions;
    double intensity_factor = 0.5;
    bool operator==(const Spike&) const = default;
};

struct Ghosting {
    int n_ghosts = 2;
    int axis = 1;
    double intensity = 0.3;
    bool operator==(const Ghosting&) const = default;
};

using ArtifactSpec =
    std::variant<Blur, EdgeEnhance, AxialMeanFilter, AnisoDownsample, GaussianNoise, BiasField, Motion, Spike, Ghosting>;

enum class ArtifactKind : int {
    blur = 0,
    edge_enhance,
    axial_mean_filter,
    aniso_downsample,
    gaussian_noise,
    bias_field,
    motion,
    spike,
    ghosting
};

inline constexpr std::size_t kArtifactKindCount = 9;

inline constexpr std::array<const char*, kArtifactKindCount> kArtifactNames{
    "blur", "edge_enhance", "axial_mean_filter", "aniso_downsample", "gaussian_noise",
    "bias_field", "motion", "spike", "ghosting"};

inline ArtifactKind kind_of(const ArtifactSpec& s) { return static_cast<ArtifactKind>(s.index()); }
inline const char* artifact_name(ArtifactKind k) { return kArtifactNames[static_cast<std::size_t>(k)]; }
inline const char* artifact_name(const ArtifactSpec& s) { return artifact_name(kind_of(s)); }

inline ArtifactKind artifact_kind_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kArtifactKindCount; ++i)
        if (name == kArtifactNames[i]) return static_cast<ArtifactKind>(i);
    throw ParameterError("unknown artifact type '" + name + "'");
}

/// Number of monomials x^a y^b z^c with a+b+c <= order.
inline std::size_t bias_basis_size(int order) {
    const auto n = static_cast<std::size_t>(order);
    return (n + 1) * (n + 2) * (n + 3) / 6;
}

struct AugmentationPlan {
    std::vector<ArtifactSpec> artifacts;
    std::uint64_t rng_seed = 0;
    bool operator==(const AugmentationPlan&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void check_axis(int axis, const char* what) {
    if (axis < 0 || axis > 2) throw ParameterError(std::string(what) + ": axis must be 0, 1 or 2");
}

inline void check_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw ParameterError(std::string(what) + ": non-finite parameter");
}

}  // namespace detail

/// Throws ParameterError when a field is outside its validity domain.
inline void validate_artifact(const ArtifactSpec& spec) {
    using detail::check_axis;
    using detail::check_finite;
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Blur> || std::is_same_v<T, EdgeEnhance>) {
                check_finite(s.sd, "blur");
                if (s.sd <= 0.0) throw ParameterError("blur/edge_enhance: sd must be > 0");
            } else if constexpr (std::is_same_v<T, AxialMeanFilter>) {
                if (s.size < 1) throw ParameterError("axial_mean_filter: size must be >= 1");
            } else if constexpr (std::is_same_v<T, AnisoDownsample>) {
                check_axis(s.axis, "aniso_downsample");
                check_finite(s.factor, "aniso_downsample");
                if (s.factor <= 0.0) throw ParameterError("aniso_downsample: factor must be > 0");
                if (s.factor < 1.0) throw ParameterError("aniso_downsample: factor must be >= 1");
            } else if constexpr (std::is_same_v<T, GaussianNoise>) {
                check_finite(s.sd, "gaussian_noise");
                if (s.sd < 0.0) throw ParameterError("gaussian_noise: sd must be >= 0");
            } else if constexpr (std::is_same_v<T, BiasField>) {
                if (s.order < 0) throw ParameterError("bias_field: order must be >= 0");
                if (s.coefficients.size() != bias_basis_size(s.order))
                    throw ParameterError("bias_field: expected " + std::to_string(bias_basis_size(s.order)) +
                                         " coefficients for order " + std::to_string(s.order) + ", got " +
                                         std::to_string(s.coefficients.size()));
                for (double c : s.coefficients) check_finite(c, "bias_field");
            } else if constexpr (std::is_same_v<T, Motion>) {
                check_axis(s.phase_axis, "motion");
                if (s.transforms.empty()) throw ParameterError("motion: transforms must be non-empty");
                for (const auto& t : s.transforms)
                    for (int a = 0; a < 3; ++a) {
                        check_finite(t.rotation_deg[static_cast<std::size_t>(a)], "motion");
                        check_finite(t.translation_mm[static_cast<std::size_t>(a)], "motion");
                    }
            } else if constexpr (std::is_same_v<T, Spike>) {
                check_finite(s.intensity_factor, "spike");
                if (s.intensity_factor < 0.0) throw ParameterError("spike: intensity_factor must be >= 0");
                for (const auto& p : s.positions)
                    for (double c : p) {
                        check_finite(c, "spike");
                        if (c < -0.5 || c > 0.5) throw ParameterError("spike: positions must lie in [-0.5, 0.5]");
                    }
            } else if constexpr (std::is_same_v<T, Ghosting>) {
                check_axis(s.axis, "ghosting");
                if (s.n_ghosts < 1) throw ParameterError("ghosting: n_ghosts must be >= 1");
                check_finite(s.intensity, "ghosting");
                if (s.intensity < 0.0 || s.intensity > 1.0)
                    throw ParameterError("ghosting: intensity must lie in [0, 1]");
            }
        },
        spec);
}

// ---------------------------------------------------------------------------
// Individual artifacts

namespace detail {

inline Volume downsample_upsample(const Volume& v, int axis, double factor) {
    Volume out = v;
    const auto n = v.dims()[static_cast<std::size_t>(axis)];
    if (n < 2) return out;
    const auto m = std::max<std::int64_t>(1, std::llround(static_cast<double>(n) / factor));
    const double f = static_cast<double>(n) / static_cast<double>(m);
    std::vector<double> line(static_cast<std::size_t>(n)), coarse(static_cast<std::size_t>(m));
    detail::for_each_line(v.dims(), axis, [&](std::int64_t base, std::int64_t stride, std::int64_t len) {
        for (std::int64_t i = 0; i < len; ++i) line[static_cast<std::size_t>(i)] = v.data[static_cast<std::size_t>(base + i * stride)];
        // Area-weighted box average: coarse sample i covers [i f, (i+1) f).
        for (std::int64_t i = 0; i < m; ++i) {
            const double lo = static_cast<double>(i) * f, hi = static_cast<double>(i + 1) * f;
            double acc = 0.0;
            for (auto j = static_cast<std::int64_t>(std::floor(lo)); j < len && static_cast<double>(j) < hi; ++j) {
                const double w = std::min(hi, static_cast<double>(j + 1)) - std::max(lo, static_cast<double>(j));
                if (w > 0.0) acc += w * line[static_cast<std::size_t>(j)];
            }
            coarse[static_cast<std::size_t>(i)] = acc / f;
        }
        bspline_prefilter(coarse);
        for (std::int64_t j = 0; j < len; ++j) {
            const double x = (static_cast<double>(j) + 0.5) / f - 0.5;
            out.data[static_cast<std::size_t>(base + j * stride)] = bspline_eval(coarse, x);
        }
    });
    return out;
}

inline double robust_range(const Volume& v) {
    double r = percentile(v.data, 99.0) - percentile(v.data, 1.0);
    if (r > 0.0) return r;
    const auto [lo, hi] = std::minmax_element(v.data.begin(), v.data.end());
    r = *hi - *lo;
    return r > 0.0 ? r : 1.0;
}

inline Volume apply_bias(const Volume& v, const BiasField& b) {
    const auto& d = v.dims();
    auto axis_coords = [](std::int64_t n) {
        std::vector<double> c(static_cast<std::size_t>(n), 0.0);
        for (std::int64_t i = 0; i < n && n > 1; ++i)
            c[static_cast<std::size_t>(i)] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        return c;
    };
    const auto cx = axis_coords(d[0]), cy = axis_coords(d[1]), cz = axis_coords(d[2]);
    const auto order = static_cast<std::size_t>(b.order);
    // Powers per axis: pw[axis][i][p] = coord_i^p.
    auto powers = [order](const std::vector<double>& c) {
        std::vector<std::vector<double>> pw(c.size(), std::vector<double>(order + 1, 1.0));
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t p = 1; p <= order; ++p) pw[i][p] = pw[i][p - 1] * c[i];
        return pw;
    };
    const auto px = powers(cx), py = powers(cy), pz = powers(cz);
    Volume out = v;
    std::size_t idx = 0;
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x, ++idx) {
                double s = 0.0;
                std::size_t c = 0;
                for (std::size_t a = 0; a <= order; ++a)
                    for (std::size_t bb = 0; bb + a <= order; ++bb)
                        for (std::size_t cc = 0; cc + bb + a <= order; ++cc)
                            s += b.coefficients[c++] * px[static_cast<std::size_t>(x)][a] *
                                 py[static_cast<std::size_t>(y)][bb] * pz[static_cast<std::size_t>(z)][cc];
                out.data[idx] = s == 0.0 ? v.data[idx] : v.data[idx] * std::exp(s);
            }
    return out;
}

inline bool is_identity(const RigidMotion& t) {
    return t.rotation_deg == Vec3{0, 0, 0} && t.translation_mm == Vec3{0, 0, 0};
}

/// Rigidly moves the volume about its grid centre (physical units), trilinear
/// interpolation with edge clamping.
inline Volume rigid_resample(const Volume& v, const RigidMotion& t) {
    if (is_identity(t)) return v;
    const auto& d = v.dims();
    const auto& s = v.geometry.spacing;
    const double deg = std::numbers::pi / 180.0;
    const double ax = t.rotation_deg[0] * deg, ay = t.rotation_deg[1] * deg, az = t.rotation_deg[2] * deg;
    const double rx[3][3] = {{1, 0, 0}, {0, std::cos(ax), -std::sin(ax)}, {0, std::sin(ax), std::cos(ax)}};
    const double ry[3][3] = {{std::cos(ay), 0, std::sin(ay)}, {0, 1, 0}, {-std::sin(ay), 0, std::cos(ay)}};
    const double rz[3][3] = {{std::cos(az), -std::sin(az), 0}, {std::sin(az), std::cos(az), 0}, {0, 0, 1}};
    double ryx[3][3]{}, r[3][3]{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) ryx[i][j] += ry[i][k] * rx[k][j];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += rz[i][k] * ryx[k][j];

    const double c[3] = {0.5 * static_cast<double>(d[0] - 1), 0.5 * static_cast<double>(d[1] - 1),
                         0.5 * static_cast<double>(d[2] - 1)};
    Volume out(v.geometry);
    auto clampi = [](double x, std::int64_t n) { return std::clamp(x, 0.0, static_cast<double>(n - 1)); };
    std::size_t idx = 0;
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x, ++idx) {
                const double p[3] = {(static_cast<double>(x) - c[0]) * s[0] - t.translation_mm[0],
                                     (static_cast<double>(y) - c[1]) * s[1] - t.translation_mm[1],
                                     (static_cast<double>(z) - c[2]) * s[2] - t.translation_mm[2]};
                double q[3];
                for (int i = 0; i < 3; ++i) {
                    // Inverse rotation: R^T p.
                    const double w = r[0][i] * p[0] + r[1][i] * p[1] + r[2][i] * p[2];
                    q[i] = clampi(w / s[static_cast<std::size_t>(i)] + c[i], d[static_cast<std::size_t>(i)]);
                }
                const auto x0 = static_cast<std::int64_t>(std::floor(q[0]));
                const auto y0 = static_cast<std::int64_t>(std::floor(q[1]));
                const auto z0 = static_cast<std::int64_t>(std::floor(q[2]));
                const auto x1 = std::min(x0 + 1, d[0] - 1), y1 = std::min(y0 + 1, d[1] - 1),
                           z1 = std::min(z0 + 1, d[2] - 1);
                const double fx = q[0] - static_cast<double>(x0), fy = q[1] - static_cast<double>(y0),
                             fz = q[2] - static_cast<double>(z0);
                const double c00 = v.at(x0, y0, z0) * (1 - fx) + v.at(x1, y0, z0) * fx;
                const double c10 = v.at(x0, y1, z0) * (1 - fx) + v.at(x1, y1, z0) * fx;
                const double c01 = v.at(x0, y0, z1) * (1 - fx) + v.at(x1, y0, z1) * fx;
                const double c11 = v.at(x0, y1, z1) * (1 - fx) + v.at(x1, y1, z1) * fx;
                out.data[idx] = (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz;
            }
    return out;
}

inline Volume apply_motion(const Volume& v, const Motion& m) {
    const auto& d = v.dims();
    const auto n = d[static_cast<std::size_t>(m.phase_axis)];
    const auto slabs = static_cast<std::int64_t>(m.transforms.size());
    const std::int64_t slab_len = std::max<std::int64_t>(1, n / slabs);
    // Slab owning each phase-encode line.
    std::vector<std::int64_t> owner(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) owner[static_cast<std::size_t>(k)] = std::min(shifted_position(k, n) / slab_len, slabs - 1);
    Spectrum assembled(d);
    for (std::int64_t t = 0; t < slabs; ++t) {
        const Spectrum moved = forward_fft(rigid_resample(v, m.transforms[static_cast<std::size_t>(t)]));
        std::size_t i = 0;
        for (std::int64_t z = 0; z < d[2]; ++z)
            for (std::int64_t y = 0; y < d[1]; ++y)
                for (std::int64_t x = 0; x < d[0]; ++x, ++i) {
                    const std::int64_t k = m.phase_axis == 0 ? x : m.phase_axis == 1 ? y : z;
                    if (owner[static_cast<std::size_t>(k)] == t) assembled[i] = moved[i];
                }
    }
    return inverse_fft_magnitude(std::move(assembled), v.geometry);
}

inline Volume apply_spike(const Volume& v, const Spike& sp) {
    const auto& d = v.dims();
    Spectrum s = forward_fft(v);
    double peak2 = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) peak2 = std::max(peak2, std::norm(s[i]));
    const double peak = std::sqrt(peak2);
    constexpr double kDcExclusion = 3.0;
    for (const auto& p : sp.positions) {
        double k[3];
        for (std::size_t a = 0; a < 3; ++a) k[a] = p[a] * static_cast<double>(d[a]);
        const double r = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
        if (r < kDcExclusion) {
            if (r == 0.0) {
                const auto widest = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
                k[widest] = kDcExclusion;
            } else {
                for (auto& x : k) x *= kDcExclusion / r;
            }
        }
        std::int64_t bin[3];
        for (std::size_t a = 0; a < 3; ++a) {
            const auto f = std::clamp<std::int64_t>(std::llround(k[a]), -(d[a] / 2), (d[a] - 1) / 2);
            bin[a] = f < 0 ? f + d[a] : f;
        }
        s[v.geometry.index(bin[0], bin[1], bin[2])] += std::complex<double>(sp.intensity_factor * peak, 0.0);
    }
    return inverse_fft_magnitude(std::move(s), v.geometry);
}

inline Volume apply_ghosting(const Volume& v, const Ghosting& g) {
    const auto& d = v.dims();
    const auto n = d[static_cast<std::size_t>(g.axis)];
    Spectrum s = forward_fft(v);
    const double scale = 1.0 - g.intensity;
    std::vector<double> factor(static_cast<std::size_t>(n), 1.0);
    for (std::int64_t k = 1; k < n; ++k)
        if (shifted_position(k, n) % g.n_ghosts == 0) factor[static_cast<std::size_t>(k)] = scale;
    std::size_t i = 0;
    for (std::int64_t z = 0; z < d[2]; ++z)
        for (std::int64_t y = 0; y < d[1]; ++y)
            for (std::int64_t x = 0; x < d[0]; ++x, ++i)
                s[i] *= factor[static_cast<std::size_t>(g.axis == 0 ? x : g.axis == 1 ? y : z)];
    return inverse_fft_magnitude(std::move(s), v.geometry);
}

}  // namespace detail

/// Applies one artifact. Geometry is preserved; `rng` is consumed only by
/// GaussianNoise.
inline Volume apply_artifact(const Volume& v, const ArtifactSpec& spec, Rng& rng) {
    v.validate();
    require_finite(v, "apply_artifact");
    validate_artifact(spec);
    return std::visit(
        [&](const auto& s) -> Volume {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Blur>) {
                return gaussian_blur(v, s.sd);
            } else if constexpr (std::is_same_v<T, EdgeEnhance>) {
                const Volume b = gaussian_blur(v, s.sd);
                Volume out = v;
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * v[i] - b[i];
                return out;
            } else if constexpr (std::is_same_v<T, AxialMeanFilter>) {
                return mean_filter_axis(v, kAxialAxis, s.size);
            } else if constexpr (std::is_same_v<T, AnisoDownsample>) {
                return detail::downsample_upsample(v, s.axis, s.factor);
            } else if constexpr (std::is_same_v<T, GaussianNoise>) {
                const double sd = s.relative ? s.sd * detail::robust_range(v) : s.sd;
                if (sd == 0.0) return v;
                std::normal_distribution<double> noise(0.0, sd);
                Volume out = v;
                for (auto& x : out.data) x += noise(rng);
                return out;
            } else if constexpr (std::is_same_v<T, BiasField>) {
                return detail::apply_bias(v, s);
            } else if constexpr (std::is_same_v<T, Motion>) {
                return detail::apply_motion(v, s);
            } else if constexpr (std::is_same_v<T, Spike>) {
                return detail::apply_spike(v, s);
            } else {
                return detail::apply_ghosting(v, s);
            }
        },
        spec);
}

/// Applies the plan's artifacts in list order from a generator seeded with
/// plan.rng_seed. Order matters: [Blur, Noise] and [Noise, Blur] differ.
inline Volume apply_plan(const Volume& v, const AugmentationPlan& plan) {
    Rng rng(plan.rng_seed);
    Volume out = v;
    for (const auto& spec : plan.artifacts) out = apply_artifact(out, spec, rng);
    return out;
}

// ---------------------------------------------------------------------------
// Sampling

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const Range&) const = default;
};

struct IntRange {
    int lo = 0;
    int hi = 0;
    bool operator==(const IntRange&) const = default;
};

struct ArtifactToggle {
    bool enabled = true;
    double probability = 0.5;  ///< used in independent mode only
    bool operator==(const ArtifactToggle&) const = default;
};

enum class SamplingMode { one_of, independent };

/// How plans are drawn. Defaults reproduce the published parameter ranges
/// where they exist.
struct SamplingPolicy {
    SamplingMode mode = SamplingMode::one_of;
    std::array<ArtifactToggle, kArtifactKindCount> toggles{};

    Range blur_sd{0.5, 1.75};
    Range edge_sd{0.5, 1.75};
    IntRange axial_size{2, 4};
    Range downsample_factor{1.5, 4.0};
    Range noise_sd{0.02, 0.1};
    bool noise_relative = true;
    int bias_order = 3;
    Range bias_coefficient{-0.4, 0.4};
    IntRange motion_transforms{2, 4};
    Range motion_rotation_deg{-5.0, 5.0};
    Range motion_translation_mm{-4.0, 4.0};
    IntRange spike_count{1, 1};
    Range spike_intensity{0.1, 1.0};
    /// Normalized radius around DC excluded when sampling spike positions
    /// (3 voxels on a 64-voxel axis).
    double spike_dc_exclusion = 3.0 / 64.0;
    IntRange ghost_count{2, 5};
    Range ghost_intensity{0.1, 0.5};

    ArtifactToggle& toggle(ArtifactKind k) { return toggles[static_cast<std::size_t>(k)]; }
    const ArtifactToggle& toggle(ArtifactKind k) const { return toggles[static_cast<std::size_t>(k)]; }

    /// Policy with every artifact disabled except `k`.
    static SamplingPolicy only(ArtifactKind k) {
        SamplingPolicy p;
        for (auto& t : p.toggles) t.enabled = false;
        p.toggle(k).enabled = true;
        return p;
    }

    bool any_enabled() const {
        return std::any_of(toggles.begin(), toggles.end(), [](const auto& t) { return t.enabled; });
    }

    bool operator==(const SamplingPolicy&) const = default;
};

inline void validate_policy(const SamplingPolicy& p) {
    auto range = [](const Range& r, const char* what, double min_lo) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
            throw ParameterError(std::string("policy: invalid range for ") + what);
        if (r.lo < min_lo) throw ParameterError(std::string("policy: range for ") + what + " below validity domain");
    };
    auto irange = [](const IntRange& r, const char* what, int min_lo) {
        if (r.lo > r.hi || r.lo < min_lo) throw ParameterError(std::string("policy: invalid range for ") + what);
    };
    const double inf = -std::numeric_limits<double>::infinity();
    range(p.blur_sd, "blur sd", 1e-12);
    range(p.edge_sd, "edge_enhance sd", 1e-12);
    irange(p.axial_size, "axial_mean_filter size", 1);
    range(p.downsample_factor, "aniso_downsample factor", 1.0);
    range(p.noise_sd, "gaussian_noise sd", 0.0);
    if (p.bias_order < 0 || p.bias_order > 8) throw ParameterError("policy: bias_field order must lie in [0, 8]");
    range(p.bias_coefficient, "bias_field coefficient", inf);
    irange(p.motion_transforms, "motion transforms", 1);
    range(p.motion_rotation_deg, "motion rotation", inf);
    range(p.motion_translation_mm, "motion translation", inf);
    irange(p.spike_count, "spike count", 1);
    range(p.spike_intensity, "spike intensity", 0.0);
    if (!(p.spike_dc_exclusion >= 0.0 && p.spike_dc_exclusion < 0.5))
        throw ParameterError("policy: spike_dc_exclusion must lie in [0, 0.5)");
    irange(p.ghost_count, "ghosting count", 1);
    range(p.ghost_intensity, "ghosting intensity", 0.0);
    if (p.ghost_intensity.hi > 1.0) throw ParameterError("policy: ghosting intensity must not exceed 1");
    for (const auto& t : p.toggles)
        if (!(t.probability >= 0.0 && t.probability <= 1.0))
            throw ParameterError("policy: probabilities must lie in [0, 1]");
}

namespace detail {

inline double draw(Rng& rng, const Range& r) {
    if (r.lo == r.hi) return r.lo;
    return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

inline int draw(Rng& rng, const IntRange& r) { return std::uniform_int_distribution<int>(r.lo, r.hi)(rng); }

inline int draw_axis(Rng& rng) { return std::uniform_int_distribution<int>(0, 2)(rng); }

inline ArtifactSpec draw_artifact(ArtifactKind k, const SamplingPolicy& p, Rng& rng) {
    switch (k) {
        case ArtifactKind::blur: return Blur{draw(rng, p.blur_sd)};
        case ArtifactKind::edge_enhance: return EdgeEnhance{draw(rng, p.edge_sd)};
        case ArtifactKind::axial_mean_filter: return AxialMeanFilter{draw(rng, p.axial_size)};
        case ArtifactKind::aniso_downsample: {
            AnisoDownsample a;
            a.axis = draw_axis(rng);
            a.factor = draw(rng, p.downsample_factor);
            return a;
        }
        case ArtifactKind::gaussian_noise: return GaussianNoise{draw(rng, p.noise_sd), p.noise_relative};
        case ArtifactKind::bias_field: {
            BiasField b;
            b.order = p.bias_order;
            b.coefficients.resize(bias_basis_size(p.bias_order));
            for (auto& c : b.coefficients) c = draw(rng, p.bias_coefficient);
            return b;
        }
        case ArtifactKind::motion: {
            Motion m;
            const int count = draw(rng, p.motion_transforms);
            for (int t = 0; t < count; ++t) {
                RigidMotion r;
                for (auto& a : r.rotation_deg) a = draw(rng, p.motion_rotation_deg);
                for (auto& a : r.translation_mm) a = draw(rng, p.motion_translation_mm);
                m.transforms.push_back(r);
            }
            m.phase_axis = draw_axis(rng);
            return m;
        }
        case ArtifactKind::spike: {
            Spike s;
            const int count = draw(rng, p.spike_count);
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (int i = 0; i < count; ++i) {
                Vec3 pos;
                do {
                    for (auto& c : pos) c = u(rng);
                } while (std::sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]) < p.spike_dc_exclusion);
                s.positions.push_back(pos);
            }
            s.intensity_factor = draw(rng, p.spike_intensity);
            return s;
        }
        case ArtifactKind::ghosting: {
            Ghosting g;
            g.n_ghosts = draw(rng, p.ghost_count);
            g.axis = draw_axis(rng);
            g.intensity = draw(rng, p.ghost_intensity);
            return g;
        }
    }
    throw ParameterError("unknown artifact kind");
}

}  // namespace detail

/// Draws a plan. One-of mode picks exactly one enabled artifact uniformly;
/// independent mode includes each enabled artifact with its own probability,
/// in canonical order. The plan's seed is the first value drawn from `rng`.
inline AugmentationPlan sample_plan(const SamplingPolicy& policy, Rng& rng) {
    validate_policy(policy);
    AugmentationPlan plan;
    plan.rng_seed = rng();
    std::vector<ArtifactKind> enabled;
    for (std::size_t i = 0; i < kArtifactKindCount; ++i)
        if (policy.toggles[i].enabled) enabled.push_back(static_cast<ArtifactKind>(i));

    if (policy.mode == SamplingMode::one_of) {
        if (enabled.empty()) throw EmptyPolicyError("sample_plan: every artifact is disabled");
        std::uniform_int_distribution<std::size_t> pick(0, enabled.size() - 1);
        plan.artifacts.push_back(detail::draw_artifact(enabled[pick(rng)], policy, rng));
    } else {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (auto k : enabled)
            if (coin(rng) < policy.toggle(k).probability) plan.artifacts.push_back(detail::draw_artifact(k, policy, rng));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Orthogonal flips and rotations

struct OrientedSample {
    Volume volume;
    std::vector<BinaryMask> masks;
    OrthoTransform transform;
};

/// Applies one of the 48 axis-aligned transforms, drawn uniformly, to the
/// volume and every mask.
inline OrientedSample orthogonal_flip_rotate(const Volume& v, const std::vector<BinaryMask>& masks, Rng& rng) {
    for (const auto& m : masks) require_same_geometry(v, m, "orthogonal_flip_rotate");
    OrientedSample out;
    out.transform = sample_ortho_transform(rng);
    out.volume = out.transform.apply(v);
    out.masks.reserve(masks.size());
    for (const auto& m : masks) out.masks.push_back(out.transform.apply(m));
    return out;
}

}  // namespace lesionforge
