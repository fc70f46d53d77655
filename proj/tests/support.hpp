#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "lesionforge/volume.hpp"
#include "oracles/brute_force.hpp"

namespace testing_support {

using namespace lesionforge;

inline std::filesystem::path data_dir() { return std::filesystem::path(LESIONFORGE_SOURCE_DIR) / "tests" / "data"; }

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "lesionforge-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline BinaryMask random_mask(const Geometry& g, double density, std::mt19937_64& rng) {
    BinaryMask m(g);
    std::bernoulli_distribution on(density);
    for (auto& v : m.data) v = on(rng) ? 1 : 0;
    return m;
}

inline Volume random_volume(const Geometry& g, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    Volume v(g);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& x : v.data) x = u(rng);
    return v;
}

/// Smooth blob-like phantom: background ramp plus bright spheres.
inline Volume phantom(const Geometry& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Volume v(g);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto& d = g.dims;
    std::vector<std::array<double, 4>> blobs;
    for (int b = 0; b < 4; ++b)
        blobs.push_back({u(rng) * d[0], u(rng) * d[1], u(rng) * d[2], 2.0 + 4.0 * u(rng)});
    for (std::int64_t k = 0; k < d[2]; ++k)
        for (std::int64_t j = 0; j < d[1]; ++j)
            for (std::int64_t i = 0; i < d[0]; ++i) {
                double x = 100.0 + 20.0 * static_cast<double>(i) / static_cast<double>(d[0]);
                for (const auto& b : blobs) {
                    const double r2 = (i - b[0]) * (i - b[0]) + (j - b[1]) * (j - b[1]) + (k - b[2]) * (k - b[2]);
                    x += 60.0 * std::exp(-r2 / (2.0 * b[3] * b[3]));
                }
                v.at(i, j, k) = x;
            }
    return v;
}

inline oracle::Shape shape_of(const Geometry& g) {
    return {static_cast<int>(g.dims[0]), static_cast<int>(g.dims[1]), static_cast<int>(g.dims[2])};
}

inline oracle::VoxelSet voxels(const BinaryMask& m) { return oracle::voxels_of(m.data, shape_of(m.geometry)); }

inline void set_box(BinaryMask& m, Index3 lo, Index3 hi, std::uint8_t value = 1) {
    for (auto k = lo[2]; k <= hi[2]; ++k)
        for (auto j = lo[1]; j <= hi[1]; ++j)
            for (auto i = lo[0]; i <= hi[0]; ++i) m.at(i, j, k) = value;
}

inline double relative_l2(const Volume& a, const Volume& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Relative path -> content hash for every regular file under `root`.
inline std::map<std::string, std::uint64_t> tree_hashes(const std::filesystem::path& root) {
    std::map<std::string, std::uint64_t> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = fnv1a(read_file(e.path()));
    return out;
}

/// Runs a shell command, returning its exit status.
inline int run_shell(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testing_support
