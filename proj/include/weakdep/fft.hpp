#pragma once

// Thin FFTW wrappers. Plans are created once per size under a mutex and then
// executed through the new-array interface, which is thread-safe.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace weakdep {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

/// fftw_malloc'd complex buffer (SIMD aligned, as the plans expect).
class FftBuffer {
public:
    explicit FftBuffer(std::size_t n)
        : n_(n), p_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n ? n : 1)))) {
        if (!p_) throw std::bad_alloc();
    }
    fftw_complex* data() { return p_.get(); }
    const fftw_complex* data() const { return p_.get(); }
    std::size_t size() const { return n_; }
    double& re(std::size_t i) { return p_.get()[i][0]; }
    double& im(std::size_t i) { return p_.get()[i][1]; }
    double re(std::size_t i) const { return p_.get()[i][0]; }
    double im(std::size_t i) const { return p_.get()[i][1]; }

private:
    std::size_t n_;
    std::unique_ptr<fftw_complex, FftwFree> p_;
};

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline PlanPair plans_for(std::size_t n) {
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard lock(fftw_planner_mutex());
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    FftBuffer a(n), b(n);
    const int len = static_cast<int>(n);
    PlanPair p;
    p.forward = fftw_plan_dft_1d(len, a.data(), b.data(), FFTW_FORWARD, FFTW_ESTIMATE);
    p.backward = fftw_plan_dft_1d(len, a.data(), b.data(), FFTW_BACKWARD, FFTW_ESTIMATE);
    cache.emplace(n, p);
    return p;
}

}  // namespace detail

/// Unnormalized complex DFT of fixed length.
class ComplexFft {
public:
    explicit ComplexFft(std::size_t n) : n_(n), plans_(detail::plans_for(n)) {}
    std::size_t size() const { return n_; }
    void forward(FftBuffer& in, FftBuffer& out) const { fftw_execute_dft(plans_.forward, in.data(), out.data()); }
    void backward(FftBuffer& in, FftBuffer& out) const { fftw_execute_dft(plans_.backward, in.data(), out.data()); }

private:
    std::size_t n_;
    detail::PlanPair plans_;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t m = 1;
    while (m < n) m <<= 1;
    return m;
}

/// Valid part of the linear convolution: out[s] = sum_q taps[q] x[s + T - 1 - q],
/// s = 0 .. x.size() - T, computed through a cached transform of the taps.
class FftConvolver {
public:
    FftConvolver(const std::vector<double>& taps, std::size_t signal_length)
        : taps_(taps.size()), len_(signal_length), fft_(next_pow2(signal_length)), spectrum_(fft_.size()) {
        FftBuffer in(fft_.size());
        for (std::size_t i = 0; i < fft_.size(); ++i) {
            in.re(i) = i < taps.size() ? taps[i] : 0.0;
            in.im(i) = 0.0;
        }
        fft_.forward(in, spectrum_);
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        const std::size_t m = fft_.size();
        FftBuffer a(m), b(m);
        for (std::size_t i = 0; i < m; ++i) {
            a.re(i) = i < x.size() ? x[i] : 0.0;
            a.im(i) = 0.0;
        }
        fft_.forward(a, b);
        for (std::size_t i = 0; i < m; ++i) {
            const std::complex<double> z(b.re(i), b.im(i)), w(spectrum_.re(i), spectrum_.im(i));
            const auto p = z * w;
            b.re(i) = p.real();
            b.im(i) = p.imag();
        }
        fft_.backward(b, a);
        std::vector<double> out(x.size() - taps_ + 1);
        const double scale = 1.0 / static_cast<double>(m);
        for (std::size_t s = 0; s < out.size(); ++s) out[s] = a.re(s + taps_ - 1) * scale;
        return out;
    }

    std::size_t signal_length() const { return len_; }

private:
    std::size_t taps_;
    std::size_t len_;
    ComplexFft fft_;
    FftBuffer spectrum_;
};

}  // namespace weakdep
