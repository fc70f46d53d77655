#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lesionforge/volume.hpp"

namespace lesionforge {

/// Face (6), face+edge (18) or full (26) voxel adjacency.
enum class Connectivity : int { face = 6, edge = 18, vertex = 26 };

inline Connectivity connectivity_from_int(int n) {
    switch (n) {
        case 6: return Connectivity::face;
        case 18: return Connectivity::edge;
        case 26: return Connectivity::vertex;
        default: throw ParameterError("connectivity must be 6, 18 or 26 (got " + std::to_string(n) + ")");
    }
}

/// Neighbour offsets for the given adjacency.
inline std::vector<Index3> neighbour_offsets(Connectivity c) {
    std::vector<Index3> out;
    for (std::int64_t dz = -1; dz <= 1; ++dz)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const int nonzero = (dx != 0) + (dy != 0) + (dz != 0);
                if (nonzero == 0) continue;
                if (c == Connectivity::face && nonzero > 1) continue;
                if (c == Connectivity::edge && nonzero > 2) continue;
                out.push_back({dx, dy, dz});
            }
    return out;
}

/// Labels maximal components. Labels are handed out in the scan order of
/// each component's first voxel, so the result is deterministic.
inline LabeledMask connected_components(const BinaryMask& m, Connectivity conn = Connectivity::vertex) {
    LabeledMask out;
    out.labels = Grid<std::int32_t>(m.geometry, 0);
    const auto& g = m.geometry;
    const auto offsets = neighbour_offsets(conn);
    std::vector<std::size_t> stack;
    std::int32_t next = 0;
    for (std::size_t seed = 0; seed < m.size(); ++seed) {
        if (!m[seed] || out.labels[seed] != 0) continue;
        ++next;
        out.labels[seed] = next;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            const auto p = g.coords(cur);
            for (const auto& o : offsets) {
                const std::int64_t x = p[0] + o[0], y = p[1] + o[1], z = p[2] + o[2];
                if (!g.contains(x, y, z)) continue;
                const std::size_t ni = g.index(x, y, z);
                if (m[ni] && out.labels[ni] == 0) {
                    out.labels[ni] = next;
                    stack.push_back(ni);
                }
            }
        }
    }
    out.count = next;
    return out;
}

/// Voxel count per label; entry 0 is the background count.
inline std::vector<std::size_t> label_voxel_counts(const LabeledMask& l) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(l.count) + 1, 0);
    for (auto lab : l.labels.data) ++counts[static_cast<std::size_t>(lab)];
    return counts;
}

inline double lesion_volume_mm3(const LabeledMask& l, std::int32_t label) {
    if (label < 1 || label > l.count)
        throw DomainError("lesion_volume_mm3: label " + std::to_string(label) + " outside 1.." +
                          std::to_string(l.count));
    std::size_t n = 0;
    for (auto lab : l.labels.data) n += (lab == label);
    const auto& s = l.geometry().spacing;
    return static_cast<double>(n) * s[0] * s[1] * s[2];
}

/// Mask of a single component.
inline BinaryMask component_mask(const LabeledMask& l, std::int32_t label) {
    BinaryMask m(l.geometry());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = l.labels[i] == label ? 1 : 0;
    return m;
}

/// Drops components whose volume is below `min_mm3`. Exactly `min_mm3` survives.
inline BinaryMask filter_small_lesions(const BinaryMask& m, double min_mm3,
                                       Connectivity conn = Connectivity::vertex) {
    if (!(min_mm3 >= 0.0)) throw ParameterError("filter_small_lesions: min_mm3 must be >= 0");
    const auto l = connected_components(m, conn);
    const auto counts = label_voxel_counts(l);
    const auto& s = m.geometry.spacing;
    std::vector<char> keep(counts.size(), 0);
    for (std::size_t lab = 1; lab < counts.size(); ++lab)
        keep[lab] = static_cast<double>(counts[lab]) * s[0] * s[1] * s[2] >= min_mm3;
    BinaryMask out(m.geometry);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = keep[static_cast<std::size_t>(l.labels[i])] ? 1 : 0;
    return out;
}

/// Chessboard-distance dilation by `radius` voxels (cube structuring element).
inline BinaryMask dilate(const BinaryMask& m, int radius) {
    if (radius <= 0) return m;
    const auto& d = m.geometry.dims;
    BinaryMask cur = m;
    // Separable running max along each axis.
    for (int axis = 0; axis < 3; ++axis) {
        BinaryMask next(m.geometry);
        const std::int64_t n = d[axis];
        const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? d[0] : d[0] * d[1]);
        const std::int64_t lines = static_cast<std::int64_t>(m.size()) / n;
        for (std::int64_t line = 0; line < lines; ++line) {
            std::int64_t base;
            if (axis == 0) base = line * n;
            else if (axis == 1) base = (line % d[0]) + (line / d[0]) * d[0] * d[1];
            else base = line;
            for (std::int64_t i = 0; i < n; ++i) {
                std::uint8_t v = 0;
                const std::int64_t lo = std::max<std::int64_t>(0, i - radius);
                const std::int64_t hi = std::min<std::int64_t>(n - 1, i + radius);
                for (std::int64_t k = lo; k <= hi && !v; ++k) v = cur[static_cast<std::size_t>(base + k * stride)];
                next[static_cast<std::size_t>(base + i * stride)] = v ? 1 : 0;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace lesionforge
