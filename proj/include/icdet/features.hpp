#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/dsp.hpp"
#include "icdet/io.hpp"

namespace icdet {

/// Sliding-window framing: 1.5 s windows advanced by 0.125 s, i.e. an
/// 8 Hz frame rate at 512 Hz.
struct FramerSpec {
    double window_seconds = 1.5;
    double shift_seconds = 0.125;

    std::size_t window_samples(unsigned sample_rate) const {
        return static_cast<std::size_t>(std::lround(window_seconds * sample_rate));
    }
    std::size_t shift_samples(unsigned sample_rate) const {
        return static_cast<std::size_t>(std::lround(shift_seconds * sample_rate));
    }
    void validate(unsigned sample_rate) const {
        require(window_samples(sample_rate) > 0, "window must span at least one sample");
        require(shift_samples(sample_rate) > 0, "shift must span at least one sample");
        require(shift_samples(sample_rate) <= window_samples(sample_rate), "shift must not exceed window");
    }
};

struct EntropySpec {
    int bins = 32;
    void validate() const { require(bins >= 2, "entropy needs at least 2 bins"); }
};

/// Frame ranges [start, end) over n_samples.
inline std::vector<std::pair<std::size_t, std::size_t>> frame_indices(std::size_t n_samples,
                                                                      const FramerSpec& spec,
                                                                      unsigned sample_rate) {
    spec.validate(sample_rate);
    const std::size_t w = spec.window_samples(sample_rate);
    const std::size_t s = spec.shift_samples(sample_rate);
    require(n_samples >= w, "recording shorter than one analysis window");
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t count = (n_samples - w) / s + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.emplace_back(i * s, i * s + w);
    return out;
}

/// Normalized Shannon entropy of a sample vector: histogram over `bins`
/// equal-width bins spanning [min, max], H = -sum p ln p, divided by
/// ln(bins). A constant vector has zero entropy by convention.
inline double shannon_entropy(const std::vector<double>& x, const EntropySpec& spec) {
    spec.validate();
    require(x.size() >= 2, "entropy needs at least 2 samples");
    double mn = x[0], mx = x[0];
    for (double v : x) {
        if (v < mn) mn = v;
        if (v > mx) mx = v;
    }
    if (!(mx > mn)) return 0.0;
    const int k = spec.bins;
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    const double scale = static_cast<double>(k) / (mx - mn);
    for (double v : x) {
        int idx = static_cast<int>((v - mn) * scale);
        if (idx >= k) idx = k - 1;
        ++counts[static_cast<std::size_t>(idx)];
    }
    const double inv_n = 1.0 / static_cast<double>(x.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) * inv_n;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(k));
}

/// Per-frame feature matrix, [n_channels x n_value_columns]. For entropy
/// features columns are the analysis bands and every value lies in [0, 1];
/// the PSD baseline reuses the shape with frequency-bin columns.
struct FrameFeatures {
    std::size_t frame_index = 0;
    double t_end = 0.0;
    Matrix values;
};

/// (channel index, column index) pair naming one feature.
struct FeatureId {
    int channel = 0;
    int band = 0;
    friend bool operator==(const FeatureId& a, const FeatureId& b) {
        return a.channel == b.channel && a.band == b.band;
    }
};

struct FeatureOptions {
    bool apply_car = true;
    double notch_hz = 0.0;   // 0 disables the mains notch
    double notch_q = 12.0;
    int threads = 1;         // 0 = hardware concurrency
};

namespace detail {

inline int resolve_threads(int threads, std::size_t jobs) {
    if (threads <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw == 0 ? 1 : static_cast<int>(hw);
    }
    if (static_cast<std::size_t>(threads) > jobs) threads = static_cast<int>(jobs == 0 ? 1 : jobs);
    return threads;
}

/// Runs fn(i) for i in [0, jobs) across a fixed thread count. Each index
/// writes only its own output slot, so results do not depend on scheduling.
template <typename Fn>
inline void parallel_for(std::size_t jobs, int threads, Fn&& fn) {
    threads = resolve_threads(threads, jobs);
    if (threads <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([=, &fn]() {
            for (std::size_t i = static_cast<std::size_t>(t); i < jobs;
                 i += static_cast<std::size_t>(threads))
                fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Entropy of the band envelopes of one window, all bands of one channel.
/// Bands are processed two at a time to share Hilbert transforms.
inline void window_band_entropies(const std::vector<double>& window,
                                  const std::vector<FilterDesign>& designs,
                                  const FilterDesign* notch, const EntropySpec& espec,
                                  double* out) {
    const std::vector<double>& src = window;
    std::vector<double> notched;
    if (notch) {
        notched = zerolag_filter(*notch, window);
    }
    const std::vector<double>& base = notch ? notched : src;
    std::vector<double> env1, env2;
    std::size_t b = 0;
    for (; b + 1 < designs.size(); b += 2) {
        const auto y1 = zerolag_filter(designs[b], base);
        const auto y2 = zerolag_filter(designs[b + 1], base);
        hilbert_envelope_pair(y1, y2, env1, env2);
        out[b] = shannon_entropy(env1, espec);
        out[b + 1] = shannon_entropy(env2, espec);
    }
    if (b < designs.size()) {
        const auto y = zerolag_filter(designs[b], base);
        out[b] = shannon_entropy(hilbert_envelope(y), espec);
    }
}

inline std::vector<double> car_window(const Matrix& samples, std::size_t start, std::size_t end,
                                      std::size_t channel, bool apply_car) {
    std::vector<double> w(end - start);
    if (apply_car) {
        const double inv = 1.0 / static_cast<double>(samples.cols());
        for (std::size_t r = start; r < end; ++r) {
            const double* row = samples.row_ptr(r);
            double mean = 0.0;
            for (std::size_t c = 0; c < samples.cols(); ++c) mean += row[c];
            w[r - start] = row[channel] - mean * inv;
        }
    } else {
        for (std::size_t r = start; r < end; ++r) w[r - start] = samples(r, channel);
    }
    return w;
}

} // namespace detail

/// Full frame x channel x band normalized-entropy extraction. Frames are
/// independent and run concurrently; output order is by frame index.
inline std::vector<FrameFeatures> extract_entropy_features(const Recording& rec,
                                                           const std::vector<BandSpec>& bands,
                                                           const FramerSpec& framer,
                                                           const EntropySpec& espec,
                                                           const FeatureOptions& opts = {}) {
    rec.validate();
    espec.validate();
    require(!bands.empty(), "need at least one analysis band");
    const auto frames = frame_indices(rec.n_samples(), framer, rec.sample_rate);
    const double sr = static_cast<double>(rec.sample_rate);

    std::vector<FilterDesign> designs;
    designs.reserve(bands.size());
    for (const auto& b : bands) designs.push_back(design_bandpass(b, sr));
    FilterDesign notch;
    const bool use_notch = opts.notch_hz > 0.0;
    if (use_notch) notch = design_notch(opts.notch_hz, opts.notch_q, sr);

    std::vector<FrameFeatures> out(frames.size());
    detail::parallel_for(frames.size(), opts.threads, [&](std::size_t fi) {
        const auto [start, end] = frames[fi];
        FrameFeatures ff;
        ff.frame_index = fi;
        ff.t_end = static_cast<double>(end) / sr;
        ff.values = Matrix(rec.n_channels(), bands.size());
        for (std::size_t c = 0; c < rec.n_channels(); ++c) {
            const auto window = detail::car_window(rec.samples, start, end, c, opts.apply_car);
            detail::window_band_entropies(window, designs, use_notch ? &notch : nullptr, espec,
                                          ff.values.row_ptr(c));
        }
        out[fi] = std::move(ff);
    });
    return out;
}

/// Extractor restricted to a fixed set of channel-band pairs; this is the
/// inference path shared by offline evaluation and streaming replay.
class SelectedFeatureExtractor {
public:
    SelectedFeatureExtractor(const std::vector<BandSpec>& bands, const FramerSpec& framer,
                             const EntropySpec& espec, std::vector<FeatureId> selected,
                             unsigned sample_rate, const FeatureOptions& opts = {})
        : framer_(framer), espec_(espec), selected_(std::move(selected)), opts_(opts),
          sample_rate_(sample_rate) {
        espec_.validate();
        framer_.validate(sample_rate);
        for (const auto& b : bands) designs_.push_back(design_bandpass(b, sample_rate));
        if (opts_.notch_hz > 0.0) {
            notch_ = design_notch(opts_.notch_hz, opts_.notch_q, sample_rate);
            use_notch_ = true;
        }
        for (const auto& id : selected_) {
            require(id.band >= 0 && static_cast<std::size_t>(id.band) < designs_.size(),
                    "selected feature references unknown band");
            bool known = false;
            for (auto& [ch, bands_of_ch] : by_channel_)
                if (ch == id.channel) {
                    bands_of_ch.push_back(id.band);
                    known = true;
                }
            if (!known) by_channel_.push_back({id.channel, {id.band}});
        }
    }

    const std::vector<FeatureId>& selected() const { return selected_; }

    /// Feature vector for the window [start, end) of `samples`, ordered
    /// like the selected pair list.
    std::vector<double> compute(const Matrix& samples, std::size_t start, std::size_t end) const {
        std::vector<double> values(selected_.size(), 0.0);
        std::vector<double> env1, env2;
        for (const auto& [ch, band_list] : by_channel_) {
            require(ch >= 0 && static_cast<std::size_t>(ch) < samples.cols(),
                    "selected feature references unknown channel");
            const auto window =
                detail::car_window(samples, start, end, static_cast<std::size_t>(ch), opts_.apply_car);
            std::vector<double> notched;
            if (use_notch_) notched = zerolag_filter(notch_, window);
            const std::vector<double>& base = use_notch_ ? notched : window;
            std::size_t i = 0;
            for (; i + 1 < band_list.size(); i += 2) {
                const auto y1 = zerolag_filter(designs_[static_cast<std::size_t>(band_list[i])], base);
                const auto y2 = zerolag_filter(designs_[static_cast<std::size_t>(band_list[i + 1])], base);
                hilbert_envelope_pair(y1, y2, env1, env2);
                store(values, ch, band_list[i], shannon_entropy(env1, espec_));
                store(values, ch, band_list[i + 1], shannon_entropy(env2, espec_));
            }
            if (i < band_list.size()) {
                const auto y = zerolag_filter(designs_[static_cast<std::size_t>(band_list[i])], base);
                store(values, ch, band_list[i], shannon_entropy(hilbert_envelope(y), espec_));
            }
        }
        return values;
    }

    std::size_t window_samples() const { return framer_.window_samples(sample_rate_); }

private:
    void store(std::vector<double>& values, int ch, int band, double v) const {
        for (std::size_t j = 0; j < selected_.size(); ++j)
            if (selected_[j].channel == ch && selected_[j].band == band) values[j] = v;
    }

    FramerSpec framer_;
    EntropySpec espec_;
    std::vector<FeatureId> selected_;
    FeatureOptions opts_;
    unsigned sample_rate_;
    std::vector<FilterDesign> designs_;
    FilterDesign notch_;
    bool use_notch_ = false;
    std::vector<std::pair<int, std::vector<int>>> by_channel_;
};

/// Welch log-power baseline: 0.5 s Hann segments with 50% overlap inside
/// each analysis window, one-sided power at 2 Hz resolution, bins kept in
/// [4, 48] Hz.
struct PsdSpec {
    double segment_seconds = 0.5;
    double overlap = 0.5;
    double f_min = 4.0;
    double f_max = 48.0;

    std::vector<double> bin_frequencies(unsigned sample_rate) const {
        const std::size_t nseg = static_cast<std::size_t>(std::lround(segment_seconds * sample_rate));
        const double df = static_cast<double>(sample_rate) / static_cast<double>(nseg);
        std::vector<double> f;
        for (std::size_t k = 0; k <= nseg / 2; ++k) {
            const double fk = df * static_cast<double>(k);
            if (fk >= f_min - 1e-9 && fk <= f_max + 1e-9) f.push_back(fk);
        }
        return f;
    }
};

inline std::vector<FrameFeatures> extract_psd_features(const Recording& rec, const FramerSpec& framer,
                                                       const PsdSpec& psd = {},
                                                       const FeatureOptions& opts = {}) {
    rec.validate();
    const auto frames = frame_indices(rec.n_samples(), framer, rec.sample_rate);
    const double sr = static_cast<double>(rec.sample_rate);
    const std::size_t nseg = static_cast<std::size_t>(std::lround(psd.segment_seconds * sr));
    require(nseg >= 8, "PSD segment too short");
    require(nseg <= framer.window_samples(rec.sample_rate), "PSD segment longer than analysis window");
    const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         std::lround(static_cast<double>(nseg) * (1.0 - psd.overlap))));

    std::vector<double> hann(nseg);
    double u = 0.0;
    for (std::size_t i = 0; i < nseg; ++i) {
        hann[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(nseg)));
        u += hann[i] * hann[i];
    }
    const double df = sr / static_cast<double>(nseg);
    std::vector<std::size_t> keep_bins;
    for (std::size_t k = 0; k <= nseg / 2; ++k) {
        const double fk = df * static_cast<double>(k);
        if (fk >= psd.f_min - 1e-9 && fk <= psd.f_max + 1e-9) keep_bins.push_back(k);
    }
    require(!keep_bins.empty(), "PSD bin range is empty");

    FilterDesign notch;
    const bool use_notch = opts.notch_hz > 0.0;
    if (use_notch) notch = design_notch(opts.notch_hz, opts.notch_q, sr);

    std::vector<FrameFeatures> out(frames.size());
    detail::parallel_for(frames.size(), opts.threads, [&](std::size_t fi) {
        const auto [start, end] = frames[fi];
        FrameFeatures ff;
        ff.frame_index = fi;
        ff.t_end = static_cast<double>(end) / sr;
        ff.values = Matrix(rec.n_channels(), keep_bins.size());
        std::vector<cplx> seg(nseg);
        std::vector<double> power(nseg / 2 + 1);
        for (std::size_t c = 0; c < rec.n_channels(); ++c) {
            auto window = detail::car_window(rec.samples, start, end, c, opts.apply_car);
            if (use_notch) window = zerolag_filter(notch, window);
            std::fill(power.begin(), power.end(), 0.0);
            std::size_t n_segments = 0;
            for (std::size_t s0 = 0; s0 + nseg <= window.size(); s0 += hop) {
                for (std::size_t i = 0; i < nseg; ++i) seg[i] = cplx(window[s0 + i] * hann[i], 0.0);
                fft_forward(seg);
                for (std::size_t k = 0; k <= nseg / 2; ++k) {
                    double p = std::norm(seg[k]) / (sr * u);
                    if (k != 0 && !(nseg % 2 == 0 && k == nseg / 2)) p *= 2.0;
                    power[k] += p;
                }
                ++n_segments;
            }
            for (std::size_t j = 0; j < keep_bins.size(); ++j) {
                const double p = power[keep_bins[j]] / static_cast<double>(n_segments);
                ff.values(c, j) = std::log(std::max(p, 1e-300));
            }
        }
        out[fi] = std::move(ff);
    });
    return out;
}

/// Flattened view of a feature run: X is [n_frames x n_features] with
/// feature j = channel * n_columns + column.
struct FeatureTable {
    Matrix X;
    std::vector<double> t_end;
    std::vector<std::size_t> frame_index;
    std::vector<FeatureId> names;
};

inline FeatureTable flatten_features(const std::vector<FrameFeatures>& frames) {
    FeatureTable table;
    if (frames.empty()) return table;
    const std::size_t n_ch = frames.front().values.rows();
    const std::size_t n_col = frames.front().values.cols();
    table.X = Matrix(frames.size(), n_ch * n_col);
    table.t_end.resize(frames.size());
    table.frame_index.resize(frames.size());
    for (std::size_t c = 0; c < n_ch; ++c)
        for (std::size_t b = 0; b < n_col; ++b)
            table.names.push_back({static_cast<int>(c), static_cast<int>(b)});
    for (std::size_t f = 0; f < frames.size(); ++f) {
        require(frames[f].values.rows() == n_ch && frames[f].values.cols() == n_col,
                "inconsistent feature shapes across frames");
        table.t_end[f] = frames[f].t_end;
        table.frame_index[f] = frames[f].frame_index;
        for (std::size_t c = 0; c < n_ch; ++c)
            for (std::size_t b = 0; b < n_col; ++b) table.X(f, c * n_col + b) = frames[f].values(c, b);
    }
    return table;
}

/// One row per frame: frame,t,<channel|column>... for offline inspection.
inline void write_feature_csv(const std::string& path, const std::vector<FrameFeatures>& frames,
                              const std::vector<std::string>& channels,
                              const std::vector<std::string>& column_names) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "frame,t";
    for (const auto& ch : channels)
        for (const auto& col : column_names) f << ',' << ch << '|' << col;
    f << "\n";
    char num[32];
    for (const auto& ff : frames) {
        f << ff.frame_index << ',';
        std::snprintf(num, sizeof num, "%.3f", ff.t_end);
        f << num;
        for (std::size_t c = 0; c < ff.values.rows(); ++c)
            for (std::size_t b = 0; b < ff.values.cols(); ++b) {
                std::snprintf(num, sizeof num, "%.9f", ff.values(c, b));
                f << ',' << num;
            }
        f << "\n";
    }
}

} // namespace icdet
