#pragma once

// The 48 axis-aligned orthogonal transforms (6 axis permutations x 8 flip
// patterns) acting on voxel grids. The affine is updated so that every voxel
// keeps its world position.

#include <array>
#include <cstdint>
#include <string>

#include "lesionforge/rng.hpp"
#include "lesionforge/volume.hpp"

namespace lesionforge {

struct OrthoTransform {
    /// Output axis i reads input axis perm[i], reversed when flip[i].
    std::array<int, 3> perm{0, 1, 2};
    std::array<bool, 3> flip{false, false, false};

    static constexpr int kCount = 48;

    static OrthoTransform identity() { return {}; }

    static OrthoTransform from_index(int idx) {
        static constexpr std::array<std::array<int, 3>, 6> perms{
            {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
        if (idx < 0 || idx >= kCount) throw DomainError("OrthoTransform index out of range");
        OrthoTransform t;
        t.perm = perms[static_cast<std::size_t>(idx / 8)];
        for (int a = 0; a < 3; ++a) t.flip[a] = ((idx % 8) >> a) & 1;
        return t;
    }

    int index() const {
        for (int i = 0; i < kCount; ++i)
            if (from_index(i) == *this) return i;
        return -1;
    }

    static OrthoTransform mirror(int axis) {
        OrthoTransform t;
        t.flip[static_cast<std::size_t>(axis)] = true;
        return t;
    }

    /// Quarter turn in the plane of the two axes other than `axis`.
    static OrthoTransform rotate90(int axis) {
        const int a = (axis + 1) % 3, b = (axis + 2) % 3;
        OrthoTransform t;
        t.perm[static_cast<std::size_t>(a)] = b;
        t.flip[static_cast<std::size_t>(a)] = true;
        t.perm[static_cast<std::size_t>(b)] = a;
        return t;
    }

    /// `then` applied after *this.
    OrthoTransform followed_by(const OrthoTransform& then) const {
        OrthoTransform r;
        for (std::size_t i = 0; i < 3; ++i) {
            const auto p = static_cast<std::size_t>(then.perm[i]);
            r.perm[i] = perm[p];
            r.flip[i] = then.flip[i] != flip[p];
        }
        return r;
    }

    OrthoTransform inverse() const {
        OrthoTransform r;
        for (std::size_t i = 0; i < 3; ++i) {
            const auto p = static_cast<std::size_t>(perm[i]);
            r.perm[p] = static_cast<int>(i);
            r.flip[p] = flip[i];
        }
        return r;
    }

    bool operator==(const OrthoTransform&) const = default;

    Geometry apply(const Geometry& in) const {
        Geometry out;
        Affine m = identity_affine();
        for (int r = 0; r < 3; ++r) m[r][r] = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const auto p = static_cast<std::size_t>(perm[i]);
            out.dims[i] = in.dims[p];
            out.spacing[i] = in.spacing[p];
            m[p][i] = flip[i] ? -1.0 : 1.0;
            m[p][3] = flip[i] ? static_cast<double>(in.dims[p] - 1) : 0.0;
        }
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += in.affine[r][k] * m[k][c];
                out.affine[r][c] = s;
            }
        return out;
    }

    template <typename T>
    Grid<T> apply(const Grid<T>& in) const {
        Grid<T> out(apply(in.geometry));
        const auto& od = out.geometry.dims;
        const auto& id = in.geometry.dims;
        Index3 src{};
        std::size_t o = 0;
        for (std::int64_t z = 0; z < od[2]; ++z)
            for (std::int64_t y = 0; y < od[1]; ++y)
                for (std::int64_t x = 0; x < od[0]; ++x, ++o) {
                    const std::int64_t oc[3] = {x, y, z};
                    for (std::size_t i = 0; i < 3; ++i) {
                        const auto p = static_cast<std::size_t>(perm[i]);
                        src[p] = flip[i] ? id[p] - 1 - oc[i] : oc[i];
                    }
                    out.data[o] = in.at(src[0], src[1], src[2]);
                }
        return out;
    }

    std::string to_string() const {
        std::string s;
        for (std::size_t i = 0; i < 3; ++i) {
            if (i) s += ",";
            s += (flip[i] ? "-" : "+") + std::to_string(perm[i]);
        }
        return s;
    }
};

/// Uniform draw over all 48 transforms.
inline OrthoTransform sample_ortho_transform(Rng& rng) {
    std::uniform_int_distribution<int> pick(0, OrthoTransform::kCount - 1);
    return OrthoTransform::from_index(pick(rng));
}

}  // namespace lesionforge
