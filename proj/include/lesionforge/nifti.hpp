#pragma once

// Strict NIfTI-1 subset: single-file .nii / .nii.gz, little-endian, 3D
// (trailing singleton dims allowed), no header extensions, datatypes
// uint8 / int16 / float32 / float64. Anything else is rejected.

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lesionforge/volume.hpp"

namespace lesionforge {

static_assert(std::endian::native == std::endian::little, "NIfTI I/O assumes a little-endian host");

enum class NiftiType : std::int16_t { uint8 = 2, int16 = 4, float32 = 16, float64 = 64 };

namespace detail {

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiDataOffset = 352;

template <typename T>
T read_le(const std::vector<unsigned char>& buf, std::size_t off) {
    T v;
    std::memcpy(&v, buf.data() + off, sizeof(T));
    return v;
}

template <typename T>
void write_le(std::vector<unsigned char>& buf, std::size_t off, T v) {
    std::memcpy(buf.data() + off, &v, sizeof(T));
}

inline bool has_gz_suffix(const std::filesystem::path& p) {
    const auto s = p.string();
    return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

/// Reads a whole file, transparently inflating gzip content.
inline std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("nifti: no such file: " + path.string());
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("nifti: cannot open " + path.string());
    std::unique_ptr<gzFile_s, decltype(&gzclose)> guard(f, &gzclose);
    std::vector<unsigned char> out;
    std::vector<unsigned char> chunk(1 << 16);
    for (;;) {
        const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
        if (n < 0) {
            int code = 0;
            const char* msg = gzerror(f, &code);
            throw CorruptFileError("nifti: read failure in " + path.string() + ": " + (msg ? msg : "?"));
        }
        if (n == 0) break;
        out.insert(out.end(), chunk.begin(), chunk.begin() + n);
    }
    // gzread reports a truncated deflate stream as EOF with Z_BUF_ERROR pending.
    int code = Z_OK;
    gzerror(f, &code);
    if (code != Z_OK && code != Z_STREAM_END)
        throw CorruptFileError("nifti: truncated compressed stream in " + path.string());
    return out;
}

inline Affine quaternion_affine(double b, double c, double d, double qfac, const Vec3& pix, const Vec3& offset) {
    double a = 1.0 - (b * b + c * c + d * d);
    if (a < 1e-7) {
        const double s = 1.0 / std::sqrt(b * b + c * c + d * d);
        b *= s;
        c *= s;
        d *= s;
        a = 0.0;
    } else {
        a = std::sqrt(a);
    }
    const double r[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                            {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                            {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
    Affine m = identity_affine();
    const double scale[3] = {pix[0], pix[1], pix[2] * qfac};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[j];
        m[i][3] = offset[i];
    }
    return m;
}

inline const char* type_name(std::int16_t code) {
    switch (code) {
        case 2: return "uint8";
        case 4: return "int16";
        case 8: return "int32";
        case 16: return "float32";
        case 64: return "float64";
        case 256: return "int8";
        case 512: return "uint16";
        case 768: return "uint32";
        case 1024: return "int64";
        case 1280: return "uint64";
        case 32: return "complex64";
        case 128: return "rgb24";
        default: return "unknown";
    }
}

}  // namespace detail

/// Loads a NIfTI-1 file into the canonical double representation with
/// scl_slope/scl_inter applied.
inline Volume load_volume(const std::filesystem::path& path) {
    using namespace detail;
    const auto buf = slurp(path);
    if (buf.size() < kNiftiHeaderSize) throw CorruptFileError("nifti: file shorter than header: " + path.string());

    const auto hdr_size = read_le<std::int32_t>(buf, 0);
    if (hdr_size != static_cast<std::int32_t>(kNiftiHeaderSize)) {
        if (__builtin_bswap32(static_cast<std::uint32_t>(hdr_size)) == kNiftiHeaderSize)
            throw UnsupportedFormatError("nifti: big-endian files are not supported: " + path.string());
        throw UnsupportedFormatError("nifti: not a NIfTI-1 header (sizeof_hdr=" + std::to_string(hdr_size) +
                                     "): " + path.string());
    }
    if (std::memcmp(buf.data() + 344, "n+1\0", 4) != 0)
        throw UnsupportedFormatError("nifti: only single-file NIfTI-1 (magic n+1) is supported: " + path.string());

    std::int16_t dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = read_le<std::int16_t>(buf, 40 + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw CorruptFileError("nifti: invalid dim[0] in " + path.string());
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] != 1)
            throw UnsupportedFormatError("nifti: only 3D images are supported (dim[" + std::to_string(i) +
                                         "]=" + std::to_string(dim[i]) + ")");
    Index3 dims{1, 1, 1};
    for (int i = 0; i < 3 && i < dim[0]; ++i) {
        if (dim[i + 1] <= 0) throw CorruptFileError("nifti: non-positive dimension in " + path.string());
        dims[i] = dim[i + 1];
    }

    const auto datatype = read_le<std::int16_t>(buf, 70);
    std::size_t bytes_per_voxel = 0;
    switch (datatype) {
        case 2: bytes_per_voxel = 1; break;
        case 4: bytes_per_voxel = 2; break;
        case 16: bytes_per_voxel = 4; break;
        case 64: bytes_per_voxel = 8; break;
        default:
            throw UnsupportedFormatError(std::string("nifti: unsupported datatype ") + type_name(datatype) +
                                         " (code " + std::to_string(datatype) + ") in " + path.string());
    }

    float pixdim[8];
    for (int i = 0; i < 8; ++i) pixdim[i] = read_le<float>(buf, 76 + 4 * i);
    const auto vox_offset = static_cast<std::size_t>(read_le<float>(buf, 108));
    if (vox_offset < kNiftiDataOffset) throw CorruptFileError("nifti: vox_offset inside header: " + path.string());
    if (buf.size() >= kNiftiDataOffset && buf[348] != 0)
        throw UnsupportedFormatError("nifti: header extensions are not supported: " + path.string());

    double slope = read_le<float>(buf, 112);
    double inter = read_le<float>(buf, 116);
    if (slope == 0.0 || !std::isfinite(slope)) {
        slope = 1.0;
        inter = 0.0;
    }
    if (!std::isfinite(inter)) inter = 0.0;

    Geometry g;
    g.dims = dims;
    const auto qform_code = read_le<std::int16_t>(buf, 252);
    const auto sform_code = read_le<std::int16_t>(buf, 254);
    if (sform_code > 0) {
        g.affine = identity_affine();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) g.affine[r][c] = read_le<float>(buf, 280 + 16 * r + 4 * c);
    } else if (qform_code > 0) {
        const double qfac = pixdim[0] < 0 ? -1.0 : 1.0;
        g.affine = quaternion_affine(read_le<float>(buf, 256), read_le<float>(buf, 260), read_le<float>(buf, 264),
                                     qfac, {pixdim[1], pixdim[2], pixdim[3]},
                                     {read_le<float>(buf, 268), read_le<float>(buf, 272), read_le<float>(buf, 276)});
    } else {
        g.affine = identity_affine();
        for (int i = 0; i < 3; ++i) g.affine[i][i] = pixdim[i + 1] > 0 ? pixdim[i + 1] : 1.0;
    }
    for (int c = 0; c < 3; ++c)
        g.spacing[c] = std::sqrt(g.affine[0][c] * g.affine[0][c] + g.affine[1][c] * g.affine[1][c] +
                                 g.affine[2][c] * g.affine[2][c]);
    g.validate();

    const std::size_t n = g.voxel_count();
    if (buf.size() < vox_offset + n * bytes_per_voxel)
        throw CorruptFileError("nifti: truncated data section in " + path.string() + " (expected " +
                               std::to_string(vox_offset + n * bytes_per_voxel) + " bytes, got " +
                               std::to_string(buf.size()) + ")");

    Volume v(g);
    const unsigned char* src = buf.data() + vox_offset;
    for (std::size_t i = 0; i < n; ++i) {
        double raw = 0.0;
        switch (datatype) {
            case 2: raw = src[i]; break;
            case 4: {
                std::int16_t x;
                std::memcpy(&x, src + 2 * i, 2);
                raw = x;
                break;
            }
            case 16: {
                float x;
                std::memcpy(&x, src + 4 * i, 4);
                raw = x;
                break;
            }
            case 64: std::memcpy(&raw, src + 8 * i, 8); break;
        }
        v.data[i] = slope == 1.0 && inter == 0.0 ? raw : slope * raw + inter;
    }
    return v;
}

/// Saves with the given on-disk type. Integer types round to nearest and
/// saturate. A path ending in .gz is gzip-compressed.
inline void save_volume(const Volume& v, const std::filesystem::path& path, NiftiType type = NiftiType::float32) {
    using namespace detail;
    v.validate();
    const auto& g = v.geometry;
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] > std::numeric_limits<std::int16_t>::max())
            throw DomainError("nifti: dimension exceeds NIfTI-1 limit");

    std::size_t bpv = 0;
    switch (type) {
        case NiftiType::uint8: bpv = 1; break;
        case NiftiType::int16: bpv = 2; break;
        case NiftiType::float32: bpv = 4; break;
        case NiftiType::float64: bpv = 8; break;
    }
    const std::size_t n = g.voxel_count();
    std::vector<unsigned char> buf(kNiftiDataOffset + n * bpv, 0);

    write_le<std::int32_t>(buf, 0, static_cast<std::int32_t>(kNiftiHeaderSize));
    buf[39] = 0;
    write_le<std::int16_t>(buf, 40, 3);
    for (int i = 0; i < 3; ++i) write_le<std::int16_t>(buf, 42 + 2 * i, static_cast<std::int16_t>(g.dims[i]));
    for (int i = 3; i < 7; ++i) write_le<std::int16_t>(buf, 42 + 2 * i, 1);
    write_le<std::int16_t>(buf, 70, static_cast<std::int16_t>(type));
    write_le<std::int16_t>(buf, 72, static_cast<std::int16_t>(bpv * 8));
    write_le<float>(buf, 76, 1.0f);
    for (int i = 0; i < 3; ++i) write_le<float>(buf, 80 + 4 * i, static_cast<float>(g.spacing[i]));
    for (int i = 3; i < 7; ++i) write_le<float>(buf, 80 + 4 * i, 1.0f);
    write_le<float>(buf, 108, static_cast<float>(kNiftiDataOffset));
    write_le<float>(buf, 112, 1.0f);
    write_le<float>(buf, 116, 0.0f);
    buf[123] = 2;  // xyzt_units: mm
    write_le<std::int16_t>(buf, 252, 0);
    write_le<std::int16_t>(buf, 254, 2);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) write_le<float>(buf, 280 + 16 * r + 4 * c, static_cast<float>(g.affine[r][c]));
    std::memcpy(buf.data() + 344, "n+1\0", 4);

    unsigned char* dst = buf.data() + kNiftiDataOffset;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = v.data[i];
        switch (type) {
            case NiftiType::uint8: {
                const double r = std::clamp(std::nearbyint(x), 0.0, 255.0);
                dst[i] = static_cast<std::uint8_t>(r);
                break;
            }
            case NiftiType::int16: {
                const auto r = static_cast<std::int16_t>(std::clamp(std::nearbyint(x), -32768.0, 32767.0));
                std::memcpy(dst + 2 * i, &r, 2);
                break;
            }
            case NiftiType::float32: {
                const auto f = static_cast<float>(x);
                std::memcpy(dst + 4 * i, &f, 4);
                break;
            }
            case NiftiType::float64: std::memcpy(dst + 8 * i, &x, 8); break;
        }
    }

    if (has_gz_suffix(path)) {
        gzFile f = gzopen(path.c_str(), "wb6");
        if (!f) throw IoError("nifti: cannot write " + path.string());
        std::size_t off = 0;
        bool ok = true;
        while (off < buf.size() && ok) {
            const auto chunk = static_cast<unsigned>(std::min<std::size_t>(buf.size() - off, 1u << 30));
            ok = gzwrite(f, buf.data() + off, chunk) == static_cast<int>(chunk);
            off += chunk;
        }
        if (gzclose(f) != Z_OK || !ok) throw IoError("nifti: write failed for " + path.string());
    } else {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw IoError("nifti: cannot write " + path.string());
        const bool ok = std::fwrite(buf.data(), 1, buf.size(), f) == buf.size();
        if (std::fclose(f) != 0 || !ok) throw IoError("nifti: write failed for " + path.string());
    }
}

/// Non-zero voxels become "on".
inline BinaryMask load_mask(const std::filesystem::path& path) {
    const Volume v = load_volume(path);
    BinaryMask m(v.geometry);
    for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0.0 ? 1 : 0;
    return m;
}

/// Stored as uint8 with voxels in {0,1}.
inline void save_mask(const BinaryMask& m, const std::filesystem::path& path) {
    Volume v(m.geometry);
    for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i] ? 1.0 : 0.0;
    save_volume(v, path, NiftiType::uint8);
}

}  // namespace lesionforge
