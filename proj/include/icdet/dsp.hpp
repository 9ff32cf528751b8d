#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/fft.hpp"

namespace icdet {

/// Analysis band in Hz.
struct BandSpec {
    double low = 0.0;
    double high = 0.0;
    std::string name;

    void validate(double sample_rate) const {
        require(low > 0.0 && low < high, "band must satisfy 0 < low < high: " + name);
        require(high < sample_rate / 2.0, "band edge at or above Nyquist: " + name);
    }
};

/// The six canonical analysis bands.
inline std::vector<BandSpec> canonical_bands() {
    return {{8.0, 13.0, "8-13"},  {14.0, 22.0, "14-22"}, {22.0, 30.0, "22-30"},
            {30.0, 45.0, "30-45"}, {2.0, 45.0, "2-45"},   {8.0, 30.0, "8-30"}};
}

/// One biquad section, direct form II transposed: b0 b1 b2 / 1 a1 a2.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

/// Discrete band-pass design. `order` is the analog prototype order; the
/// digital band-pass has 2*order poles, carried both as expanded b/a
/// coefficients and as the biquad cascade actually used for filtering.
struct FilterDesign {
    int order = 0;
    double sample_rate = 0.0;
    std::vector<double> b;
    std::vector<double> a;
    std::vector<Biquad> sections;

    std::size_t state_order() const { return std::max(b.size(), a.size()) - 1; }

    double max_pole_radius() const {
        double worst = 0.0;
        for (const auto& s : sections) {
            const double disc = s.a1 * s.a1 - 4.0 * s.a2;
            double r;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                r = std::max(std::abs((-s.a1 + sq) * 0.5), std::abs((-s.a1 - sq) * 0.5));
            } else {
                r = std::sqrt(s.a2);
            }
            worst = std::max(worst, r);
        }
        return worst;
    }

    /// Single-pass magnitude response at frequency f (Hz).
    double gain_at(double f) const {
        const std::complex<double> z = std::exp(std::complex<double>(0.0, -2.0 * M_PI * f / sample_rate));
        std::complex<double> num(0.0, 0.0), den(0.0, 0.0), zp(1.0, 0.0);
        for (std::size_t i = 0; i < std::max(b.size(), a.size()); ++i) {
            if (i < b.size()) num += b[i] * zp;
            if (i < a.size()) den += a[i] * zp;
            zp *= z;
        }
        return std::abs(num / den);
    }
};

/// Fourth-order (by default) Butterworth band-pass: analog prototype,
/// low-pass to band-pass transform, bilinear map, paired into biquads.
/// Pass-band gain is normalized to 1 at the warped center frequency.
inline FilterDesign design_bandpass(const BandSpec& band, double sample_rate, int order = 4) {
    band.validate(sample_rate);
    require(order >= 1 && order <= 12, "unsupported filter order");

    using C = std::complex<double>;
    const double fs2 = 2.0 * sample_rate;
    const auto prewarp = [&](double f) { return fs2 * std::tan(M_PI * f / sample_rate); };
    const double w1 = prewarp(band.low);
    const double w2 = prewarp(band.high);
    const double w0 = std::sqrt(w1 * w2);
    const double bw = w2 - w1;

    // Butterworth prototype poles on the unit left-half circle.
    std::vector<C> analog_poles;
    for (int k = 0; k < order; ++k) {
        const double theta = M_PI * (2.0 * k + 1.0) / (2.0 * order) + M_PI / 2.0;
        analog_poles.push_back(C(std::cos(theta), std::sin(theta)));
    }
    // Low-pass -> band-pass: each pole splits into a pair, plus `order`
    // zeros at the analog origin.
    std::vector<C> bp_poles;
    for (const auto& p : analog_poles) {
        const C t = 0.5 * bw * p;
        const C r = std::sqrt(t * t - C(w0 * w0, 0.0));
        bp_poles.push_back(t + r);
        bp_poles.push_back(t - r);
    }
    // Bilinear transform. Analog zeros at the origin map to z = +1, the
    // `order` zeros at infinity map to z = -1.
    std::vector<C> z_poles;
    for (const auto& p : bp_poles) z_poles.push_back((C(fs2, 0.0) + p) / (C(fs2, 0.0) - p));

    FilterDesign design;
    design.order = order;
    design.sample_rate = sample_rate;

    // Pair conjugate poles (they arrive adjacent from the transform) and
    // give every section one zero at +1 and one at -1.
    std::vector<std::pair<C, C>> pole_pairs;
    std::vector<bool> used(z_poles.size(), false);
    for (std::size_t i = 0; i < z_poles.size(); ++i) {
        if (used[i]) continue;
        used[i] = true;
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t j = i + 1; j < z_poles.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(z_poles[j] - std::conj(z_poles[i]));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        used[best] = true;
        pole_pairs.emplace_back(z_poles[i], z_poles[best]);
    }
    for (const auto& [p1, p2] : pole_pairs) {
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0; // zeros at +1 and -1
        s.a1 = -(p1 + p2).real();
        s.a2 = (p1 * p2).real();
        design.sections.push_back(s);
    }

    // Normalize overall gain to 1 at the warped center, spread evenly.
    const double f_center = std::atan(w0 / fs2) * sample_rate / M_PI;
    double g = 1.0;
    {
        const C z = std::exp(C(0.0, -2.0 * M_PI * f_center / sample_rate));
        C h(1.0, 0.0);
        for (const auto& s : design.sections) {
            h *= (s.b0 + s.b1 * z + s.b2 * z * z) / (1.0 + s.a1 * z + s.a2 * z * z);
        }
        g = std::abs(h);
    }
    const double per_section = std::pow(1.0 / g, 1.0 / static_cast<double>(design.sections.size()));
    for (auto& s : design.sections) {
        s.b0 *= per_section;
        s.b1 *= per_section;
        s.b2 *= per_section;
    }

    // Expand the cascade into b/a for the record.
    std::vector<double> b{1.0}, a{1.0};
    const auto mul = [](const std::vector<double>& p, std::array<double, 3> q) {
        std::vector<double> out(p.size() + 2, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j) out[i + j] += p[i] * q[j];
        return out;
    };
    for (const auto& s : design.sections) {
        b = mul(b, {s.b0, s.b1, s.b2});
        a = mul(a, {1.0, s.a1, s.a2});
    }
    design.b = std::move(b);
    design.a = std::move(a);

    if (design.max_pole_radius() >= 1.0)
        throw std::runtime_error("unstable band-pass design for band " + band.name);
    return design;
}

/// Biquad notch (for mains interference on recorded data).
inline FilterDesign design_notch(double f0, double q, double sample_rate) {
    require(f0 > 0.0 && f0 < sample_rate / 2.0, "notch frequency must lie below Nyquist");
    require(q > 0.0, "notch Q must be positive");
    const double w0 = 2.0 * M_PI * f0 / sample_rate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double cw = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * cw / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * cw / a0;
    s.a2 = (1.0 - alpha) / a0;
    FilterDesign design;
    design.order = 2;
    design.sample_rate = sample_rate;
    design.sections = {s};
    design.b = {s.b0, s.b1, s.b2};
    design.a = {1.0, s.a1, s.a2};
    return design;
}

/// Common average reference: subtract the instantaneous cross-channel mean
/// from every channel. Idempotent.
inline Matrix car_filter(const Matrix& samples) {
    require(samples.cols() >= 2, "CAR requires at least 2 channels");
    Matrix out(samples.rows(), samples.cols());
    const double inv = 1.0 / static_cast<double>(samples.cols());
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        const double* src = samples.row_ptr(r);
        double* dst = out.row_ptr(r);
        double mean = 0.0;
        for (std::size_t c = 0; c < samples.cols(); ++c) mean += src[c];
        mean *= inv;
        for (std::size_t c = 0; c < samples.cols(); ++c) dst[c] = src[c] - mean;
    }
    return out;
}

namespace detail {

inline void sosfilt_inplace(const std::vector<Biquad>& sections, double* x, std::size_t n,
                            const std::vector<std::array<double, 2>>* zi_unit, double scale) {
    for (std::size_t si = 0; si < sections.size(); ++si) {
        const Biquad& s = sections[si];
        double z1 = zi_unit ? (*zi_unit)[si][0] * scale : 0.0;
        double z2 = zi_unit ? (*zi_unit)[si][1] * scale : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = x[i];
            const double yi = s.b0 * xi + z1;
            z1 = s.b1 * xi - s.a1 * yi + z2;
            z2 = s.b2 * xi - s.a2 * yi;
            x[i] = yi;
        }
    }
}

/// Per-section steady-state (unit-step) initial conditions, scaled later
/// by the first input sample to suppress the start-up transient.
inline std::vector<std::array<double, 2>> sosfilt_zi(const std::vector<Biquad>& sections) {
    std::vector<std::array<double, 2>> zi(sections.size());
    double cum_gain = 1.0;
    for (std::size_t si = 0; si < sections.size(); ++si) {
        const Biquad& s = sections[si];
        const double den = 1.0 + s.a1 + s.a2;
        const double g = den != 0.0 ? (s.b0 + s.b1 + s.b2) / den : 0.0;
        zi[si][0] = (g - s.b0) * cum_gain;
        zi[si][1] = (s.b2 - s.a2 * g) * cum_gain;
        cum_gain *= g;
    }
    return zi;
}

} // namespace detail

/// Zero-lag filtering: odd-reflective pad of 3x the filter order at both
/// ends, forward pass, reverse, second pass, reverse, trim. Start-up
/// transients are further suppressed with steady-state initial conditions.
inline std::vector<double> zerolag_filter(const FilterDesign& design, const std::vector<double>& x) {
    const std::size_t edge = 3 * design.state_order();
    require(x.size() > edge, "input too short for zero-lag filtering: need > " + std::to_string(edge) +
                                 " samples, got " + std::to_string(x.size()));
    const std::size_t n = x.size();
    std::vector<double> ext;
    ext.reserve(n + 2 * edge);
    for (std::size_t i = edge; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= edge; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

    const auto zi = detail::sosfilt_zi(design.sections);
    detail::sosfilt_inplace(design.sections, ext.data(), ext.size(), &zi, ext.front());
    std::reverse(ext.begin(), ext.end());
    detail::sosfilt_inplace(design.sections, ext.data(), ext.size(), &zi, ext.front());
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(edge),
                               ext.begin() + static_cast<std::ptrdiff_t>(edge + n));
}

namespace detail {

/// Discrete Hilbert transform via the exact-length analytic-signal
/// construction. Returns the imaginary part; the input is the real part.
inline void hilbert_pair(const std::vector<double>& x1, const std::vector<double>& x2,
                         std::vector<double>& h1, std::vector<double>& h2) {
    const std::size_t n = x1.size();
    std::vector<cplx> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = cplx(x1[i], x2[i]);
    fft_forward(z);

    // Unpack the two real-signal spectra, apply -j*sgn(w), repack.
    std::vector<cplx> packed(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t kr = (n - k) % n;
        const cplx xa = 0.5 * (z[k] + std::conj(z[kr]));
        const cplx xb = cplx(0.0, -0.5) * (z[k] - std::conj(z[kr]));
        double sgn = 0.0;
        if (k >= 1 && k < (n + 1) / 2) sgn = 1.0;        // positive frequencies
        else if (k >= (n + 2) / 2) sgn = -1.0;           // negative; DC/Nyquist stay 0
        const cplx m(0.0, -sgn);
        packed[k] = xa * m + cplx(0.0, 1.0) * (xb * m);
    }
    fft_inverse(packed);
    h1.resize(n);
    h2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        h1[i] = packed[i].real();
        h2[i] = packed[i].imag();
    }
}

} // namespace detail

/// Band-power envelope: magnitude of the analytic signal.
inline std::vector<double> hilbert_envelope(const std::vector<double>& x) {
    require(x.size() >= 8, "hilbert envelope needs at least 8 samples");
    std::vector<double> h, dummy;
    const std::vector<double> zero(x.size(), 0.0);
    detail::hilbert_pair(x, zero, h, dummy);
    std::vector<double> env(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) env[i] = std::hypot(x[i], h[i]);
    return env;
}

/// Two envelopes for the price of one transform pair; used by the feature
/// extractor which walks bands two at a time.
inline void hilbert_envelope_pair(const std::vector<double>& x1, const std::vector<double>& x2,
                                  std::vector<double>& env1, std::vector<double>& env2) {
    require(x1.size() == x2.size(), "paired envelope inputs must have equal length");
    require(x1.size() >= 8, "hilbert envelope needs at least 8 samples");
    std::vector<double> h1, h2;
    detail::hilbert_pair(x1, x2, h1, h2);
    env1.resize(x1.size());
    env2.resize(x2.size());
    for (std::size_t i = 0; i < x1.size(); ++i) {
        env1[i] = std::hypot(x1[i], h1[i]);
        env2[i] = std::hypot(x2[i], h2[i]);
    }
}

} // namespace icdet
