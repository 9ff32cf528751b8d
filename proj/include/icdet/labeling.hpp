#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/cva.hpp"
#include "icdet/features.hpp"
#include "icdet/io.hpp"

namespace icdet {

/// Bilateral forearm EMG at a common rate (Myo nominal 200 Hz).
struct EmgChannelPair {
    std::vector<double> left;
    std::vector<double> right;
    unsigned rate = 200;

    void validate() const {
        require(left.size() == right.size(), "EMG channels must have equal length");
        require(rate > 0, "EMG rate must be positive");
    }
};

/// Rectify-and-smooth envelope: |x| through a centered moving average.
/// Edges use the partial-window mean, so a constant input maps to itself.
inline std::vector<double> emg_envelope(const std::vector<double>& x, double smooth_seconds,
                                        unsigned rate) {
    require(rate > 0, "rate must be positive");
    const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(smooth_seconds * rate)));
    const std::size_t n = x.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + std::abs(x[i]);
    std::vector<double> out(n);
    const std::size_t half_lo = (w - 1) / 2, half_hi = w / 2;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > half_lo ? i - half_lo : 0;
        const std::size_t hi = std::min(n, i + half_hi + 1);
        out[i] = (cum[hi] - cum[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

/// True where BOTH forearm envelopes exceed their thresholds, then gaps
/// shorter than `closing_seconds` are bridged so that the pauses between
/// individual shots do not fragment a control period.
inline std::vector<std::uint8_t> activity_mask(const EmgChannelPair& pair, double threshold_left,
                                               double threshold_right, double smooth_seconds = 0.25,
                                               double closing_seconds = 0.2) {
    pair.validate();
    require(threshold_left > 0.0 && threshold_right > 0.0, "thresholds must be positive");
    const auto env_l = emg_envelope(pair.left, smooth_seconds, pair.rate);
    const auto env_r = emg_envelope(pair.right, smooth_seconds, pair.rate);
    std::vector<std::uint8_t> mask(env_l.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = env_l[i] > threshold_left && env_r[i] > threshold_right;

    const std::size_t gap_max = static_cast<std::size_t>(std::lround(closing_seconds * pair.rate));
    if (gap_max == 0) return mask;
    std::size_t i = 0;
    std::ptrdiff_t last_true = -1;
    for (; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (last_true >= 0 && i - static_cast<std::size_t>(last_true) - 1 <= gap_max) {
            for (std::size_t j = static_cast<std::size_t>(last_true) + 1; j < i; ++j) mask[j] = 1;
        }
        last_true = static_cast<std::ptrdiff_t>(i);
    }
    return mask;
}

/// Pre-closing mask, exposed for the threshold-monotonicity property.
inline std::vector<std::uint8_t> raw_activity_mask(const EmgChannelPair& pair, double threshold_left,
                                                   double threshold_right, double smooth_seconds = 0.25) {
    pair.validate();
    const auto env_l = emg_envelope(pair.left, smooth_seconds, pair.rate);
    const auto env_r = emg_envelope(pair.right, smooth_seconds, pair.rate);
    std::vector<std::uint8_t> mask(env_l.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = env_l[i] > threshold_left && env_r[i] > threshold_right;
    return mask;
}

/// Zero-order-hold resampling of the mask onto the EEG clock.
inline std::vector<std::uint8_t> resample_mask(const std::vector<std::uint8_t>& mask, unsigned from_rate,
                                               unsigned to_rate, std::size_t n_out) {
    require(from_rate > 0 && to_rate > 0, "rates must be positive");
    std::vector<std::uint8_t> out(n_out, 0);
    for (std::size_t i = 0; i < n_out; ++i) {
        const std::size_t src = i * from_rate / to_rate;
        out[i] = src < mask.size() ? mask[src] : (mask.empty() ? 0 : mask.back());
    }
    return out;
}

enum class LabelingMode { Execution, Preparation };

/// Frame-level ground truth. In PREPARATION mode frames that are not fully
/// inside an INC-stationary or IC-cue phase carry included=false and are
/// skipped by training and scoring.
struct LabelTimeline {
    std::vector<Label> labels;
    std::vector<std::uint8_t> included;
    std::vector<double> t_end;

    std::size_t n_included() const {
        std::size_t c = 0;
        for (auto v : included) c += v;
        return c;
    }
};

namespace detail {

struct PhaseSpan {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
    EventCode code = EventCode::IncStatOn;
};

inline bool is_phase_event(EventCode c) {
    return c == EventCode::IncStatOn || c == EventCode::IcCueOn || c == EventCode::IcStatOn ||
           c == EventCode::IncCueOn;
}

inline std::vector<PhaseSpan> phase_spans(const Recording& rec) {
    std::vector<PhaseSpan> spans;
    for (std::size_t i = 0; i < rec.events.size(); ++i) {
        const auto& e = rec.events[i];
        if (!is_phase_event(e.code)) continue;
        std::size_t end = rec.n_samples();
        for (std::size_t j = i + 1; j < rec.events.size(); ++j) {
            if (is_phase_event(rec.events[j].code) || rec.events[j].code == EventCode::RunEnd) {
                end = rec.events[j].sample_index + (rec.events[j].code == EventCode::RunEnd ? 1 : 0);
                break;
            }
        }
        spans.push_back({e.sample_index, end, e.code});
    }
    return spans;
}

} // namespace detail

/// EXECUTION mode: a frame is IC iff at least half of its samples carry
/// EMG activity. PREPARATION mode: INC for frames fully inside an
/// INC-stationary phase, IC for frames fully inside an IC-cue phase,
/// everything else excluded.
inline LabelTimeline build_labels(const Recording& rec, const std::vector<std::uint8_t>& mask,
                                  const FramerSpec& framer, LabelingMode mode) {
    rec.validate();
    const auto frames = frame_indices(rec.n_samples(), framer, rec.sample_rate);
    LabelTimeline tl;
    tl.labels.resize(frames.size(), Label::Inc);
    tl.included.resize(frames.size(), 1);
    tl.t_end.resize(frames.size());
    const double sr = static_cast<double>(rec.sample_rate);

    if (mode == LabelingMode::Execution) {
        require(mask.size() == rec.n_samples(), "activity mask must cover every EEG sample");
        std::vector<std::size_t> cum(mask.size() + 1, 0);
        for (std::size_t i = 0; i < mask.size(); ++i) cum[i + 1] = cum[i] + mask[i];
        for (std::size_t f = 0; f < frames.size(); ++f) {
            const auto [start, end] = frames[f];
            tl.t_end[f] = static_cast<double>(end) / sr;
            const std::size_t active = cum[end] - cum[start];
            tl.labels[f] = (2 * active >= end - start) ? Label::Ic : Label::Inc;
        }
        return tl;
    }

    const auto spans = detail::phase_spans(rec);
    bool has_inc_stat = false, has_ic_cue = false;
    for (const auto& s : spans) {
        has_inc_stat |= s.code == EventCode::IncStatOn;
        has_ic_cue |= s.code == EventCode::IcCueOn;
    }
    if (!has_inc_stat || !has_ic_cue)
        throw std::runtime_error("missing phase events: preparation labeling needs INC_STAT_ON and IC_CUE_ON");

    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto [start, end] = frames[f];
        tl.t_end[f] = static_cast<double>(end) / sr;
        tl.included[f] = 0;
        for (const auto& s : spans) {
            if (start >= s.start && end <= s.end) {
                if (s.code == EventCode::IncStatOn) {
                    tl.labels[f] = Label::Inc;
                    tl.included[f] = 1;
                } else if (s.code == EventCode::IcCueOn) {
                    tl.labels[f] = Label::Ic;
                    tl.included[f] = 1;
                }
                break;
            }
        }
    }
    return tl;
}

/// `frame,t,label` audit dump (excluded frames marked with '-').
inline void write_label_csv(const std::string& path, const LabelTimeline& tl) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "frame,t,label\n";
    char buf[64];
    for (std::size_t i = 0; i < tl.labels.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.3f,%s", i, tl.t_end[i],
                      tl.included[i] ? label_name(tl.labels[i]) : "-");
        f << buf << "\n";
    }
}

} // namespace icdet
