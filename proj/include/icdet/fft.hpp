#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <vector>

namespace icdet {

using cplx = std::complex<double>;

namespace detail {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Iterative radix-2 transform, n must be a power of two.
/// sign = -1 forward, +1 inverse (unscaled).
inline void fft_pow2(cplx* a, std::size_t n, int sign) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

} // namespace detail

/// Exact-length DFT plan. Lengths whose odd part factors into 3s and 5s run
/// through recursive mixed-radix Cooley-Tukey on top of an iterative
/// radix-2 core; anything else falls back to Bluestein's chirp-z transform.
/// Either way the result is the exact n-point DFT (window length 768 stays
/// a fast path: 3 x 256).
class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n) {
        std::size_t m = n;
        while (m % 2 == 0) m /= 2;
        while (m % 3 == 0) m /= 3;
        while (m % 5 == 0) m /= 5;
        smooth_ = (m == 1);
        if (smooth_) {
            twiddle_.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double ang = -detail::kTwoPi * static_cast<double>(i) / static_cast<double>(n);
                twiddle_[i] = cplx(std::cos(ang), std::sin(ang));
            }
            scratch_.resize(n);
        } else {
            conv_n_ = detail::next_pow2(2 * n - 1);
            chirp_.resize(n);
            bq_.assign(conv_n_, cplx(0.0, 0.0));
            for (std::size_t i = 0; i < n; ++i) {
                // i^2 reduced mod 2n keeps the trig argument small and exact
                const std::uint64_t sq = (static_cast<std::uint64_t>(i) * i) % (2 * n);
                const double ang = detail::kTwoPi * 0.5 * static_cast<double>(sq) / static_cast<double>(n);
                chirp_[i] = cplx(std::cos(ang), -std::sin(ang));
                bq_[i] = std::conj(chirp_[i]);
                if (i != 0) bq_[conv_n_ - i] = std::conj(chirp_[i]);
            }
            detail::fft_pow2(bq_.data(), conv_n_, -1);
            work_.resize(conv_n_);
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<cplx>& a) const { transform(a.data(), false); }

    void inverse(std::vector<cplx>& a) const {
        transform(a.data(), true);
        const double s = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) a[i] *= s;
    }

private:
    void transform(cplx* a, bool inv) const {
        if (inv)
            for (std::size_t i = 0; i < n_; ++i) a[i] = std::conj(a[i]);
        if (smooth_)
            mixed_radix(a, scratch_.data(), n_, 1);
        else
            bluestein(a);
        if (inv)
            for (std::size_t i = 0; i < n_; ++i) a[i] = std::conj(a[i]);
    }

    // Decimation in time by the odd factors first, so the leaves are
    // contiguous power-of-two blocks handled iteratively.
    void mixed_radix(cplx* a, cplx* tmp, std::size_t n, std::size_t stride) const {
        if (detail::is_pow2(n)) {
            detail::fft_pow2(a, n, -1);
            return;
        }
        const std::size_t p = (n % 3 == 0) ? 3 : 5;
        const std::size_t m = n / p;
        for (std::size_t q = 0; q < p; ++q)
            for (std::size_t i = 0; i < m; ++i) tmp[q * m + i] = a[i * p + q];
        for (std::size_t q = 0; q < p; ++q) mixed_radix(tmp + q * m, a, m, stride * p);
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t r = 0; r < p; ++r) {
                cplx acc(0.0, 0.0);
                const std::size_t j = k + r * m;
                for (std::size_t q = 0; q < p; ++q) {
                    const std::size_t tw = (j * q) % n * stride;
                    acc += tmp[q * m + k] * twiddle_[tw];
                }
                a[j] = acc;
            }
        }
    }

    void bluestein(cplx* a) const {
        auto& aq = work_;
        std::fill(aq.begin(), aq.end(), cplx(0.0, 0.0));
        for (std::size_t i = 0; i < n_; ++i) aq[i] = a[i] * chirp_[i];
        detail::fft_pow2(aq.data(), conv_n_, -1);
        for (std::size_t i = 0; i < conv_n_; ++i) aq[i] *= bq_[i];
        detail::fft_pow2(aq.data(), conv_n_, +1);
        const double s = 1.0 / static_cast<double>(conv_n_);
        for (std::size_t i = 0; i < n_; ++i) a[i] = aq[i] * s * chirp_[i];
    }

    std::size_t n_;
    bool smooth_ = false;
    std::vector<cplx> twiddle_;
    mutable std::vector<cplx> scratch_;
    std::size_t conv_n_ = 0;
    std::vector<cplx> chirp_;
    std::vector<cplx> bq_;
    mutable std::vector<cplx> work_;
};

/// Plan cache, one per thread so concurrent feature extraction never locks.
inline const FftPlan& fft_plan(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<FftPlan>(n);
    return *slot;
}

inline void fft_forward(std::vector<cplx>& a) { fft_plan(a.size()).forward(a); }
inline void fft_inverse(std::vector<cplx>& a) { fft_plan(a.size()).inverse(a); }

} // namespace icdet
