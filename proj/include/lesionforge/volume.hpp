#pragma once

// Volume and mask data model.
//
// Voxel storage order is x-fastest: the voxel (i, j, k) lives at
// data[i + nx * (j + ny * k)]. This is the on-disk NIfTI order, so file I/O
// never reorders.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lesionforge/error.hpp"

namespace lesionforge {

using Index3 = std::array<std::int64_t, 3>;
using Vec3 = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

inline Affine identity_affine() {
    Affine a{};
    for (int i = 0; i < 4; ++i) a[i][i] = 1.0;
    return a;
}

/// Grid shape plus voxel-to-world mapping shared by volumes and masks.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Affine affine = identity_affine();

    /// Axis-aligned geometry with the origin at voxel (0,0,0).
    static Geometry from_spacing(Index3 dims, Vec3 spacing = {1.0, 1.0, 1.0}) {
        Geometry g;
        g.dims = dims;
        g.spacing = spacing;
        g.affine = identity_affine();
        for (int i = 0; i < 3; ++i) g.affine[i][i] = spacing[i];
        return g;
    }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }

    double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }

    std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return static_cast<std::size_t>(i + dims[0] * (j + dims[1] * k));
    }

    Index3 coords(std::size_t idx) const {
        const auto n = static_cast<std::int64_t>(idx);
        return {n % dims[0], (n / dims[0]) % dims[1], n / (dims[0] * dims[1])};
    }

    bool contains(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }

    /// Throws DomainError describing the first violated invariant.
    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] <= 0) throw DomainError("geometry: dims must be positive");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
                throw DomainError("geometry: spacing must be positive and finite");
        }
        if (affine[3][0] != 0.0 || affine[3][1] != 0.0 || affine[3][2] != 0.0 || affine[3][3] != 1.0)
            throw DomainError("geometry: affine last row must be (0,0,0,1)");
        for (int c = 0; c < 3; ++c) {
            const double norm = std::sqrt(affine[0][c] * affine[0][c] + affine[1][c] * affine[1][c] +
                                          affine[2][c] * affine[2][c]);
            if (std::abs(norm - spacing[c]) > 1e-4)
                throw DomainError("geometry: spacing disagrees with affine column norm on axis " +
                                  std::to_string(c));
        }
    }

    /// Exact comparison of dims, tight comparison of spacing and affine.
    bool same_as(const Geometry& o, double tol = 1e-6) const {
        if (dims != o.dims) return false;
        for (int a = 0; a < 3; ++a)
            if (std::abs(spacing[a] - o.spacing[a]) > tol) return false;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (std::abs(affine[r][c] - o.affine[r][c]) > tol) return false;
        return true;
    }

    bool operator==(const Geometry&) const = default;

    std::string describe() const {
        std::ostringstream os;
        os << dims[0] << "x" << dims[1] << "x" << dims[2] << " @ " << spacing[0] << "," << spacing[1] << ","
           << spacing[2] << " mm";
        return os.str();
    }
};

/// Dense scalar field over a Geometry.
template <typename T>
struct Grid {
    using value_type = T;

    Geometry geometry;
    std::vector<T> data;

    Grid() = default;
    explicit Grid(Geometry g, T fill = T{}) : geometry(std::move(g)), data(geometry.voxel_count(), fill) {}
    Grid(Geometry g, std::vector<T> values) : geometry(std::move(g)), data(std::move(values)) {
        if (data.size() != geometry.voxel_count())
            throw DomainError("grid: data length " + std::to_string(data.size()) + " does not match dims " +
                              geometry.describe());
    }

    const Index3& dims() const { return geometry.dims; }
    std::size_t size() const { return data.size(); }

    T& at(std::int64_t i, std::int64_t j, std::int64_t k) { return data[geometry.index(i, j, k)]; }
    const T& at(std::int64_t i, std::int64_t j, std::int64_t k) const { return data[geometry.index(i, j, k)]; }

    T& operator[](std::size_t idx) { return data[idx]; }
    const T& operator[](std::size_t idx) const { return data[idx]; }

    void validate() const {
        geometry.validate();
        if (data.size() != geometry.voxel_count()) throw DomainError("grid: data length does not match dims");
    }

    bool operator==(const Grid&) const = default;
};

/// Canonical image carrier. Intensities are 64-bit reals in arbitrary units.
using Volume = Grid<double>;

/// Voxel is "on" when non-zero. Stored as bytes rather than vector<bool>.
using BinaryMask = Grid<std::uint8_t>;

/// Connected-component decomposition of a BinaryMask. Labels are 1..count.
struct LabeledMask {
    Grid<std::int32_t> labels;
    std::int32_t count = 0;

    const Geometry& geometry() const { return labels.geometry; }
};

template <typename A, typename B>
void require_same_geometry(const Grid<A>& a, const Grid<B>& b, const char* context) {
    if (!a.geometry.same_as(b.geometry))
        throw GeometryMismatchError(std::string(context) + ": geometry mismatch (" + a.geometry.describe() +
                                    " vs " + b.geometry.describe() + ")");
}

inline std::size_t count_on(const BinaryMask& m) {
    std::size_t n = 0;
    for (auto v : m.data) n += (v != 0);
    return n;
}

inline BinaryMask empty_mask_like(const Geometry& g) { return BinaryMask(g, std::uint8_t{0}); }

inline BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
    require_same_geometry(a, b, "mask_union");
    BinaryMask out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
    return out;
}

inline bool masks_intersect(const BinaryMask& a, const BinaryMask& b) {
    require_same_geometry(a, b, "masks_intersect");
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && b[i]) return true;
    return false;
}

/// Throws InputDomainError when any intensity is NaN or infinite.
inline void require_finite(const Volume& v, const char* context) {
    for (double x : v.data)
        if (!std::isfinite(x)) throw InputDomainError(std::string(context) + ": non-finite intensity in input");
}

}  // namespace lesionforge
