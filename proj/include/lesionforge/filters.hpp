#pragma once

// Spatial filtering kernels shared by the artifact engine and the baseline
// editors. Borders use half-sample symmetric reflection (d c b a | a b c d).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lesionforge/volume.hpp"

namespace lesionforge {

/// Half-sample symmetric reflection of an index into [0, n).
inline std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

namespace detail {

/// Calls f(base, stride, length) once for every 1D line along `axis`.
template <typename F>
void for_each_line(const Index3& d, int axis, F&& f) {
    const std::int64_t n = d[static_cast<std::size_t>(axis)];
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? d[0] : d[0] * d[1]);
    const std::int64_t lines = d[0] * d[1] * d[2] / n;
    for (std::int64_t line = 0; line < lines; ++line) {
        std::int64_t base;
        if (axis == 0) base = line * n;
        else if (axis == 1) base = (line % d[0]) + (line / d[0]) * d[0] * d[1];
        else base = line;
        f(base, stride, n);
    }
}

}  // namespace detail

/// Correlates every line along `axis` with `weights`; weights[k] multiplies
/// sample i + k - origin.
inline void correlate_axis(std::vector<double>& data, const Index3& dims, int axis, const std::vector<double>& weights,
                           std::int64_t origin) {
    std::vector<double> line;
    detail::for_each_line(dims, axis, [&](std::int64_t base, std::int64_t stride, std::int64_t n) {
        line.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(base + i * stride)];
        const auto taps = static_cast<std::int64_t>(weights.size());
        for (std::int64_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::int64_t k = 0; k < taps; ++k) {
                const std::int64_t src = i + k - origin;
                const std::int64_t j = (src >= 0 && src < n) ? src : reflect_index(src, n);
                acc += weights[static_cast<std::size_t>(k)] * line[static_cast<std::size_t>(j)];
            }
            data[static_cast<std::size_t>(base + i * stride)] = acc;
        }
    });
}

/// Normalized sampled Gaussian truncated at 4 SD.
inline std::vector<double> gaussian_kernel(double sd) {
    const auto radius = static_cast<std::int64_t>(4.0 * sd + 0.5);
    std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::int64_t k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sd * sd));
        w[static_cast<std::size_t>(k + radius)] = v;
        sum += v;
    }
    for (auto& v : w) v /= sum;
    return w;
}

/// Isotropic Gaussian smoothing; `sd_voxels` in voxel units.
inline Volume gaussian_blur(const Volume& v, double sd_voxels) {
    Volume out = v;
    if (sd_voxels <= 0.0) return out;
    const auto w = gaussian_kernel(sd_voxels);
    const auto radius = static_cast<std::int64_t>(w.size() / 2);
    for (int axis = 0; axis < 3; ++axis)
        if (out.dims()[static_cast<std::size_t>(axis)] > 1) correlate_axis(out.data, out.dims(), axis, w, radius);
    return out;
}

/// Box mean of `size` samples along one axis; window is [i - size/2, i - size/2 + size - 1].
inline Volume mean_filter_axis(const Volume& v, int axis, int size) {
    Volume out = v;
    if (size <= 1) return out;
    const std::vector<double> w(static_cast<std::size_t>(size), 1.0 / size);
    correlate_axis(out.data, out.dims(), axis, w, size / 2);
    return out;
}

/// Linear-interpolated percentile (q in [0,100]) of all intensities.
inline double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double a = values[lo];
    if (hi == lo) return a;
    const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return a + (pos - static_cast<double>(lo)) * (b - a);
}

// ---------------------------------------------------------------------------
// Cubic B-spline interpolation (1D), whole-sample mirror boundaries.

/// Converts samples to cubic B-spline coefficients in place.
inline void bspline_prefilter(std::vector<double>& c) {
    const std::size_t n = c.size();
    if (n < 2) return;
    const double z = std::sqrt(3.0) - 2.0;
    const double gain = (1.0 - z) * (1.0 - 1.0 / z);
    for (auto& x : c) x *= gain;

    // Causal initialization, exact for mirror boundaries.
    {
        double zk = z;
        double zn = std::pow(z, static_cast<double>(n - 1));
        const double iz = 1.0 / z;
        const double z2n = zn * zn;
        double sum = c[0] + zn * c[n - 1];
        zn *= zn * iz;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            sum += (zk + zn) * c[k];
            zk *= z;
            zn *= iz;
        }
        c[0] = sum / (1.0 - z2n);
    }
    for (std::size_t k = 1; k < n; ++k) c[k] += z * c[k - 1];
    c[n - 1] = (z / (z * z - 1.0)) * (c[n - 1] + z * c[n - 2]);
    for (std::size_t k = n - 1; k-- > 0;) c[k] = z * (c[k + 1] - c[k]);
}

inline double bspline3_weight(double t) {
    t = std::abs(t);
    if (t < 1.0) return 2.0 / 3.0 - t * t + 0.5 * t * t * t;
    if (t < 2.0) {
        const double u = 2.0 - t;
        return u * u * u / 6.0;
    }
    return 0.0;
}

/// Evaluates a cubic spline given its coefficients at continuous position x.
inline double bspline_eval(const std::vector<double>& coeff, double x) {
    const auto n = static_cast<std::int64_t>(coeff.size());
    if (n == 1) return coeff[0];
    const auto base = static_cast<std::int64_t>(std::floor(x)) - 1;
    const std::int64_t period = 2 * (n - 1);
    double acc = 0.0;
    for (std::int64_t j = base; j < base + 4; ++j) {
        std::int64_t k = j % period;
        if (k < 0) k += period;
        if (k >= n) k = period - k;
        acc += coeff[static_cast<std::size_t>(k)] * bspline3_weight(x - static_cast<double>(j));
    }
    return acc;
}

}  // namespace lesionforge
