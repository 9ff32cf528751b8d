#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/io.hpp"
#include "icdet/labeling.hpp"
#include "icdet/rng.hpp"

namespace icdet {

/// Synthetic session layout and contrast strength. The four-phase trial
/// cycle is INC-stationary -> IC-cue -> IC-stationary -> INC-cue; cue
/// phases are fixed at 3 s, stationary phases are drawn uniformly from
/// [3.5, 4.5] s, ten cycles per run, five runs.
struct SessionSpec {
    std::uint64_t seed = 1;
    int n_runs = 5;
    int trials_per_condition = 10;
    double cue_seconds = 3.0;
    double stationary_min_seconds = 3.5;
    double stationary_max_seconds = 4.5;
    Montage montage = Montage::fpc();
    std::vector<std::string> contrast_channels;  // empty = frontal+parietal rows
    double delta = 1.0;                          // class contrast in [0, 1]
    unsigned sample_rate = 512;
    unsigned emg_rate = 200;
    double emg_latency_min = 0.2;
    double emg_latency_max = 0.6;

    void validate() const {
        require(n_runs >= 1 && trials_per_condition >= 1, "need at least one run and one trial");
        require(cue_seconds > 0.0, "cue duration must be positive");
        require(stationary_min_seconds > 0.0 && stationary_min_seconds <= stationary_max_seconds,
                "stationary duration range invalid");
        require(delta >= 0.0 && delta <= 1.0, "delta must lie in [0, 1]");
        require(emg_latency_min >= 0.0 && emg_latency_min <= emg_latency_max, "latency range invalid");
        require(sample_rate > 0 && emg_rate > 0, "rates must be positive");
    }

    /// Frontal and parietal rows of the montage; falls back to FC/CP rows
    /// when the montage carries no F/P electrodes beyond the midline.
    std::vector<std::string> resolve_contrast_channels() const {
        if (!contrast_channels.empty()) return contrast_channels;
        auto row_of = [](const std::string& l) {
            std::size_t i = 0;
            while (i < l.size() && !(l[i] >= '0' && l[i] <= '9') && l[i] != 'z') ++i;
            return l.substr(0, i);
        };
        std::vector<std::string> out;
        for (const auto& l : montage.labels) {
            const auto row = row_of(l);
            if (row == "F" || row == "P") out.push_back(l);
        }
        if (out.size() < 4) {
            for (const auto& l : montage.labels) {
                const auto row = row_of(l);
                if (row == "FC" || row == "CP") out.push_back(l);
            }
        }
        return out;
    }
};

enum class Phase : std::uint8_t { IncStationary = 0, IcCue = 1, IcStationary = 2, IncCue = 3 };

/// Full generator output: recording + EMG + per-sample ground truth.
struct GeneratedSession {
    Recording eeg;
    EmgChannelPair emg;
    std::vector<std::uint8_t> phase;    // Phase per EEG sample
    std::vector<std::uint8_t> active;   // intended bimanual activity
    std::vector<std::uint16_t> run_id;  // per EEG sample
    std::vector<double> cue_onsets;     // IC_CUE_ON times, seconds
    std::vector<double> activity_onsets;
};

namespace detail {

struct TriWave {
    double phase = 0.0;
    double step = 0.0;
    double value() const {
        const double f = phase - std::floor(phase);
        return 2.0 * std::abs(f - 0.5);
    }
    void advance() { phase += step; }
};

struct Oscillator {
    double c = 1.0, s = 0.0;
    double dc = 1.0, ds = 0.0;
    int counter = 0;
    void init(double freq, double phase0, double fs) {
        c = std::cos(phase0);
        s = std::sin(phase0);
        const double w = 2.0 * M_PI * freq / fs;
        dc = std::cos(w);
        ds = std::sin(w);
    }
    double advance() {
        const double nc = c * dc - s * ds;
        const double ns = s * dc + c * ds;
        c = nc;
        s = ns;
        if (++counter == 1024) {
            counter = 0;
            const double inv = 1.0 / std::sqrt(c * c + s * s);
            c *= inv;
            s *= inv;
        }
        return s;
    }
};

inline void add_linear_ramp(std::vector<float>& profile, std::size_t from, std::size_t to, float v0,
                            float v1) {
    if (to <= from) return;
    const float dv = (v1 - v0) / static_cast<float>(to - from);
    float v = v0;
    for (std::size_t i = from; i < to && i < profile.size(); ++i) {
        profile[i] = v;
        v += dv;
    }
}

} // namespace detail

/// Synthesizes a labeled session. Background EEG is pink-ish noise; each
/// channel carries narrowband components at 10.5/18/26/37.5 Hz whose
/// envelopes are tonic at rest and crossfade into broad triangular sweeps
/// while the subject intends control, which raises the envelope entropy.
/// Central channels additionally lose beta amplitude from the IC cue
/// onwards (ERD-like), with the residual envelope turning irregular. EMG
/// carries ~2 Hz shot bursts during IC-stationary and INC-cue phases.
inline GeneratedSession generate_session(const SessionSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const double fs = static_cast<double>(spec.sample_rate);
    const std::size_t n_cue = static_cast<std::size_t>(std::lround(spec.cue_seconds * fs));

    // --- trial timeline -----------------------------------------------
    GeneratedSession out;
    std::vector<Event> events;
    std::vector<std::pair<std::size_t, std::size_t>> activity_spans;
    std::size_t cursor = 0;
    struct PhaseChange {
        std::size_t at;
        Phase phase;
    };
    std::vector<PhaseChange> changes;
    std::vector<std::pair<std::size_t, std::size_t>> runs;

    for (int r = 0; r < spec.n_runs; ++r) {
        const std::size_t run_start = cursor;
        events.push_back({run_start, EventCode::RunStart});
        for (int t = 0; t < spec.trials_per_condition; ++t) {
            const double stat1 = rng.uniform(spec.stationary_min_seconds, spec.stationary_max_seconds);
            const double stat2 = rng.uniform(spec.stationary_min_seconds, spec.stationary_max_seconds);
            const double latency = rng.uniform(spec.emg_latency_min, spec.emg_latency_max);

            const std::size_t n_stat1 = static_cast<std::size_t>(std::lround(stat1 * fs));
            const std::size_t n_stat2 = static_cast<std::size_t>(std::lround(stat2 * fs));

            events.push_back({cursor, EventCode::IncStatOn});
            changes.push_back({cursor, Phase::IncStationary});
            cursor += n_stat1;

            events.push_back({cursor, EventCode::IcCueOn});
            changes.push_back({cursor, Phase::IcCue});
            out.cue_onsets.push_back(static_cast<double>(cursor) / fs);
            cursor += n_cue;

            events.push_back({cursor, EventCode::IcStatOn});
            changes.push_back({cursor, Phase::IcStationary});
            const std::size_t act_start = cursor + static_cast<std::size_t>(std::lround(latency * fs));
            cursor += n_stat2;

            events.push_back({cursor, EventCode::IncCueOn});
            changes.push_back({cursor, Phase::IncCue});
            cursor += n_cue;

            activity_spans.emplace_back(act_start, cursor);
            out.activity_onsets.push_back(static_cast<double>(act_start) / fs);
        }
        events.push_back({cursor - 1, EventCode::RunEnd});
        runs.emplace_back(run_start, cursor);
    }
    const std::size_t n = cursor;

    out.phase.assign(n, 0);
    for (std::size_t i = 0; i < changes.size(); ++i) {
        const std::size_t end = (i + 1 < changes.size()) ? changes[i + 1].at : n;
        std::fill(out.phase.begin() + static_cast<std::ptrdiff_t>(changes[i].at),
                  out.phase.begin() + static_cast<std::ptrdiff_t>(end),
                  static_cast<std::uint8_t>(changes[i].phase));
    }
    out.active.assign(n, 0);
    for (const auto& [a, b] : activity_spans)
        std::fill(out.active.begin() + static_cast<std::ptrdiff_t>(a),
                  out.active.begin() + static_cast<std::ptrdiff_t>(std::min(b, n)), std::uint8_t{1});
    out.run_id.assign(n, 0);
    for (std::size_t r = 0; r < runs.size(); ++r)
        std::fill(out.run_id.begin() + static_cast<std::ptrdiff_t>(runs[r].first),
                  out.run_id.begin() + static_cast<std::ptrdiff_t>(runs[r].second),
                  static_cast<std::uint16_t>(r));

    // --- intent and ERD profiles --------------------------------------
    // Intent ramps to a partial level across the cue, jumps to 1 with the
    // movement itself, and decays at the start of the next rest phase.
    // The ERD profile idles at -0.5 through rest (stable, slightly boosted
    // beta), desynchronizes from the cue onset and returns right after the
    // movement ends, so the cue itself is the only rest-side transition.
    constexpr float kCueLevel = 0.6f;
    constexpr float kRestBeta = -0.5f;
    const std::size_t rise = static_cast<std::size_t>(std::lround(0.3 * fs));
    const std::size_t fall = static_cast<std::size_t>(std::lround(0.25 * fs));
    const std::size_t erd_rise = static_cast<std::size_t>(std::lround(0.4 * fs));

    std::vector<float> intent(n, 0.0f);
    std::vector<float> erd(n, kRestBeta);
    for (std::size_t t = 0; t < out.cue_onsets.size(); ++t) {
        const std::size_t cue_at = static_cast<std::size_t>(std::lround(out.cue_onsets[t] * fs));
        const std::size_t act_at = activity_spans[t].first;
        const std::size_t act_end = activity_spans[t].second;
        detail::add_linear_ramp(intent, cue_at, cue_at + n_cue, 0.0f, kCueLevel);
        detail::add_linear_ramp(intent, cue_at + n_cue, act_at, kCueLevel, kCueLevel);
        detail::add_linear_ramp(intent, act_at, act_at + rise, kCueLevel, 1.0f);
        detail::add_linear_ramp(intent, act_at + rise, act_end, 1.0f, 1.0f);
        detail::add_linear_ramp(intent, act_end, act_end + fall, 1.0f, 0.0f);
        detail::add_linear_ramp(erd, cue_at, cue_at + erd_rise, kRestBeta, 1.0f);
        detail::add_linear_ramp(erd, cue_at + erd_rise, act_end, 1.0f, 1.0f);
        detail::add_linear_ramp(erd, act_end, act_end + fall, 1.0f, kRestBeta);
    }

    // --- EEG synthesis -------------------------------------------------
    const auto contrast_labels = spec.resolve_contrast_channels();
    const std::vector<std::string> central_labels = {"C3", "C1", "Cz", "C2", "C4"};
    const std::size_t n_ch = spec.montage.labels.size();

    out.eeg.sample_rate = spec.sample_rate;
    out.eeg.channels = spec.montage.labels;
    out.eeg.samples = Matrix(n, n_ch);
    out.eeg.events = events;
    std::sort(out.eeg.events.begin(), out.eeg.events.end());

    constexpr double kOscFreq[4] = {10.5, 18.0, 26.0, 37.5};
    constexpr double kOscAmp[4] = {10.0, 7.5, 6.0, 5.0};
    constexpr int kBetaOsc = 1;
    constexpr double kNoiseScale = 10.0;
    constexpr double kErdDepth = 0.3;

    for (std::size_t ch = 0; ch < n_ch; ++ch) {
        Rng crng = rng.fork();
        const std::string& label = spec.montage.labels[ch];
        const bool is_contrast =
            std::find(contrast_labels.begin(), contrast_labels.end(), label) != contrast_labels.end();
        const bool is_central =
            std::find(central_labels.begin(), central_labels.end(), label) != central_labels.end();

        detail::Oscillator osc[4];
        detail::TriWave tri[4];
        for (int o = 0; o < 4; ++o) {
            const double freq = kOscFreq[o] + crng.uniform(-0.4, 0.4);
            osc[o].init(freq, crng.uniform(0.0, 2.0 * M_PI), fs);
            tri[o].phase = crng.uniform(0.0, 1.0);
            tri[o].step = crng.uniform(0.9, 1.4) / fs;
        }
        // the beta band is wide enough for a faster desynchronized sweep
        if (is_central) tri[kBetaOsc].step = crng.uniform(1.5, 2.2) / fs;
        double lp_state = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0;
            const double it = static_cast<double>(intent[i]);
            const double et = static_cast<double>(erd[i]);
            for (int o = 0; o < 4; ++o) {
                double mix = 0.5;
                double amp_scale = 1.0;
                if (is_contrast) {
                    const double c = spec.delta * it;
                    mix = 0.5 + c * (tri[o].value() - 0.5);
                } else if (is_central && o == kBetaOsc) {
                    const double c = spec.delta * std::max(et, 0.0);
                    mix = 0.5 + c * (tri[o].value() - 0.5);
                    amp_scale = 1.0 - kErdDepth * spec.delta * et;
                }
                tri[o].advance();
                const double amp = kOscAmp[o] * amp_scale * (0.2 + 1.6 * mix);
                v += amp * osc[o].advance();
            }
            lp_state = 0.9 * lp_state + crng.normal();
            v += kNoiseScale * (0.7 * crng.normal() + 0.3 * lp_state);
            out.eeg.samples(i, ch) = v;
        }
    }

    // --- EMG synthesis -------------------------------------------------
    Rng erng = rng.fork();
    const double efs = static_cast<double>(spec.emg_rate);
    const std::size_t n_emg = static_cast<std::size_t>(
        std::lround(static_cast<double>(n) / fs * efs));
    out.emg.rate = spec.emg_rate;
    out.emg.left.assign(n_emg, 0.0);
    out.emg.right.assign(n_emg, 0.0);
    for (std::size_t i = 0; i < n_emg; ++i) {
        out.emg.left[i] = 0.015 * erng.normal();
        out.emg.right[i] = 0.015 * erng.normal();
    }
    const std::size_t burst_len = static_cast<std::size_t>(std::lround(0.35 * efs));
    for (const auto& [a, b] : activity_spans) {
        double t = static_cast<double>(a) / fs;
        const double t_end = static_cast<double>(b) / fs;
        while (t < t_end) {
            const std::size_t at = static_cast<std::size_t>(std::lround(t * efs));
            for (std::size_t j = 0; j < burst_len && at + j < n_emg; ++j) {
                const double env =
                    0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(j) / static_cast<double>(burst_len)));
                out.emg.left[at + j] += 2.0 * env * erng.normal();
                out.emg.right[at + j] += 2.0 * env * erng.normal();
            }
            t += 0.5 * erng.uniform(0.9, 1.1);  // ~2 Hz shot cadence
        }
    }

    out.eeg.validate();
    out.emg.validate();
    return out;
}

/// Oracle labels straight from generator state, bypassing EMG thresholds.
inline LabelTimeline truth_labels(const GeneratedSession& session, const FramerSpec& framer,
                                  LabelingMode mode = LabelingMode::Execution) {
    const auto frames = frame_indices(session.eeg.n_samples(), framer, session.eeg.sample_rate);
    LabelTimeline tl;
    tl.labels.resize(frames.size(), Label::Inc);
    tl.included.resize(frames.size(), 1);
    tl.t_end.resize(frames.size());
    const double sr = static_cast<double>(session.eeg.sample_rate);
    std::vector<std::size_t> cum(session.active.size() + 1, 0);
    for (std::size_t i = 0; i < session.active.size(); ++i) cum[i + 1] = cum[i] + session.active[i];
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto [start, end] = frames[f];
        tl.t_end[f] = static_cast<double>(end) / sr;
        if (mode == LabelingMode::Execution) {
            const std::size_t active = cum[end] - cum[start];
            tl.labels[f] = (2 * active >= end - start) ? Label::Ic : Label::Inc;
        } else {
            tl.included[f] = 0;
            bool all_inc_stat = true, all_ic_cue = true;
            for (std::size_t i = start; i < end; ++i) {
                all_inc_stat &= session.phase[i] == static_cast<std::uint8_t>(Phase::IncStationary);
                all_ic_cue &= session.phase[i] == static_cast<std::uint8_t>(Phase::IcCue);
            }
            if (all_inc_stat) {
                tl.labels[f] = Label::Inc;
                tl.included[f] = 1;
            } else if (all_ic_cue) {
                tl.labels[f] = Label::Ic;
                tl.included[f] = 1;
            }
        }
    }
    return tl;
}

/// File set written for a session under `prefix`: the EEG recording, the
/// EMG pair as a 2-channel recording, and a per-sample truth sidecar.
struct SessionPaths {
    std::string eeg_signal, eeg_events, emg_signal, emg_events, truth;

    static SessionPaths at(const std::string& prefix) {
        return {prefix + "_eeg.csv", prefix + "_eeg_events.csv", prefix + "_emg.csv",
                prefix + "_emg_events.csv", prefix + "_truth.csv"};
    }
};

inline void write_session(const GeneratedSession& session, const std::string& prefix) {
    const auto paths = SessionPaths::at(prefix);
    write_recording(session.eeg, paths.eeg_signal, paths.eeg_events);

    Recording emg_rec;
    emg_rec.sample_rate = session.emg.rate;
    emg_rec.channels = {"EMG_L", "EMG_R"};
    emg_rec.samples = Matrix(session.emg.left.size(), 2);
    for (std::size_t i = 0; i < session.emg.left.size(); ++i) {
        emg_rec.samples(i, 0) = session.emg.left[i];
        emg_rec.samples(i, 1) = session.emg.right[i];
    }
    write_recording(emg_rec, paths.emg_signal, paths.emg_events);

    std::ofstream f(paths.truth, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + paths.truth);
    f << "sample,run,phase,active\n";
    for (std::size_t i = 0; i < session.phase.size(); ++i) {
        f << i << ',' << session.run_id[i] << ',' << static_cast<int>(session.phase[i]) << ','
          << static_cast<int>(session.active[i]) << "\n";
    }
}

} // namespace icdet
