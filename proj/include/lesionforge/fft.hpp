#pragma once

// Thin RAII wrapper over FFTW's 3D complex transform. Planning is serialized
// (the FFTW planner is not thread-safe); execution is not.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstring>
#include <memory>
#include <mutex>
#include <vector>

#include "lesionforge/volume.hpp"

namespace lesionforge {

/// Complex k-space buffer in the same x-fastest order as Volume.
class Spectrum {
public:
    explicit Spectrum(const Index3& dims)
        : dims_(dims), n_(static_cast<std::size_t>(dims[0] * dims[1] * dims[2])),
          buf_(fftw_alloc_complex(n_), &fftw_free) {
        if (!buf_) throw std::bad_alloc();
        std::memset(buf_.get(), 0, n_ * sizeof(fftw_complex));
    }

    Spectrum(const Spectrum& o) : Spectrum(o.dims_) { std::memcpy(buf_.get(), o.buf_.get(), n_ * sizeof(fftw_complex)); }
    Spectrum& operator=(const Spectrum& o) {
        if (this != &o) {
            Spectrum tmp(o);
            std::swap(*this, tmp);
        }
        return *this;
    }
    Spectrum(Spectrum&&) noexcept = default;
    Spectrum& operator=(Spectrum&&) noexcept = default;

    const Index3& dims() const { return dims_; }
    std::size_t size() const { return n_; }

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_.get()); }
    const std::complex<double>* data() const { return reinterpret_cast<const std::complex<double>*>(buf_.get()); }
    std::complex<double>& operator[](std::size_t i) { return data()[i]; }
    const std::complex<double>& operator[](std::size_t i) const { return data()[i]; }

    /// Forward transform (unnormalized) in place.
    void forward() { execute(FFTW_FORWARD); }

    /// Inverse transform in place, normalized by 1/N.
    void inverse() {
        backward();
        const double s = 1.0 / static_cast<double>(n_);
        auto* d = data();
        for (std::size_t i = 0; i < n_; ++i) d[i] *= s;
    }

    /// Inverse transform in place without the 1/N factor.
    void backward() { execute(FFTW_BACKWARD); }

private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    void execute(int sign) {
        fftw_plan plan;
        {
            std::lock_guard lock(planner_mutex());
            // FFTW wants the slowest axis first.
            plan = fftw_plan_dft_3d(static_cast<int>(dims_[2]), static_cast<int>(dims_[1]), static_cast<int>(dims_[0]),
                                    buf_.get(), buf_.get(), sign, FFTW_ESTIMATE);
        }
        if (!plan) throw Error("fft: planning failed");
        fftw_execute(plan);
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }

    Index3 dims_;
    std::size_t n_;
    std::unique_ptr<fftw_complex, decltype(&fftw_free)> buf_;
};

inline Spectrum forward_fft(const Volume& v) {
    Spectrum s(v.dims());
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = {v[i], 0.0};
    s.forward();
    return s;
}

/// Inverse transform followed by magnitude, written into a volume with `g`.
inline Volume inverse_fft_magnitude(Spectrum s, const Geometry& g) {
    s.backward();
    const double scale = 1.0 / static_cast<double>(s.size());
    Volume out(g);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * std::sqrt(std::norm(s[i]));
    return out;
}

/// Signed frequency of FFT bin k on an axis of length n.
inline std::int64_t signed_frequency(std::int64_t k, std::int64_t n) { return k < (n + 1) / 2 ? k : k - n; }

/// Position of bin k after an fftshift (DC moved to n/2).
inline std::int64_t shifted_position(std::int64_t k, std::int64_t n) { return (k + n / 2) % n; }

}  // namespace lesionforge
