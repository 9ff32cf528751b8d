#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/decision.hpp"
#include "icdet/labeling.hpp"

namespace icdet {

enum class Verdict { Correct, Incorrect, Missed };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Correct: return "correct";
        case Verdict::Incorrect: return "incorrect";
        case Verdict::Missed: return "missed";
    }
    return "?";
}

struct TrialOutcome {
    std::size_t trial_id = 0;
    Verdict verdict = Verdict::Missed;
    double delay = 0.0;  // defined only for correct trials
};

/// Fraction of scored frames where the emitted label matches the timeline.
inline double single_sample_accuracy(const std::vector<Label>& predicted, const LabelTimeline& truth) {
    require(predicted.size() == truth.labels.size(),
            "trace and label timeline lengths differ: " + std::to_string(predicted.size()) + " vs " +
                std::to_string(truth.labels.size()));
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!truth.included[i]) continue;
        ++total;
        if (predicted[i] == truth.labels[i]) ++correct;
    }
    require(total > 0, "no scorable frames");
    return static_cast<double>(correct) / static_cast<double>(total);
}

struct Confusion {
    std::size_t ic_as_ic = 0, ic_as_inc = 0, inc_as_inc = 0, inc_as_ic = 0;

    double accuracy_ic() const {
        const std::size_t n = ic_as_ic + ic_as_inc;
        return n ? static_cast<double>(ic_as_ic) / static_cast<double>(n) : 0.0;
    }
    double accuracy_inc() const {
        const std::size_t n = inc_as_inc + inc_as_ic;
        return n ? static_cast<double>(inc_as_inc) / static_cast<double>(n) : 0.0;
    }
};

inline Confusion confusion_counts(const std::vector<Label>& predicted, const LabelTimeline& truth) {
    require(predicted.size() == truth.labels.size(), "trace and label timeline lengths differ");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (!truth.included[i]) continue;
        if (truth.labels[i] == Label::Ic)
            (predicted[i] == Label::Ic ? c.ic_as_ic : c.ic_as_inc)++;
        else
            (predicted[i] == Label::Inc ? c.inc_as_inc : c.inc_as_ic)++;
    }
    return c;
}

struct TrialScore {
    std::vector<TrialOutcome> outcomes;
    std::size_t excluded_ongoing = 0;  // IC already active across the whole window
};

/// Single-trial preparation scoring. For every IC-cue onset, the first
/// fresh INC->IC transition inside [cue-3s, cue+3s] decides the verdict:
/// inside the cue -> correct (delay from cue onset), before it ->
/// incorrect, none -> missed. Windows that stay inside one pre-existing
/// IC state are excluded and counted separately.
inline TrialScore score_preparation_trials(const DecisionTrace& trace, const std::vector<double>& cue_onsets,
                                           double cue_seconds = 3.0) {
    TrialScore score;
    require(cue_seconds > 0.0, "cue window must be positive");
    require(!trace.t_end.empty() || cue_onsets.empty(), "empty trace cannot cover cue events");
    for (std::size_t trial = 0; trial < cue_onsets.size(); ++trial) {
        const double t_cue = cue_onsets[trial];
        const double w_lo = t_cue - cue_seconds;
        const double w_hi = t_cue + cue_seconds;
        if (trace.t_end.back() + 1e-9 < w_hi)
            throw std::runtime_error("cue event at " + std::to_string(t_cue) +
                                     " s extends past the end of the decision trace");

        Label state = Label::Inc;  // integrator default before the first frame
        std::optional<double> onset;
        bool saw_frame = false;
        bool always_ic = true;
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const double t = trace.t_end[i];
            if (t > w_hi + 1e-9) break;
            const Label l = trace.label[i];
            if (t >= w_lo - 1e-9) {
                saw_frame = true;
                if (l != Label::Ic) always_ic = false;
                if (l == Label::Ic && state == Label::Inc && !onset) onset = t;
            }
            state = l;
        }
        if (onset) {
            if (*onset < t_cue) {
                score.outcomes.push_back({trial, Verdict::Incorrect, 0.0});
            } else {
                score.outcomes.push_back({trial, Verdict::Correct, *onset - t_cue});
            }
        } else if (saw_frame && always_ic) {
            ++score.excluded_ongoing;
        } else {
            score.outcomes.push_back({trial, Verdict::Missed, 0.0});
        }
    }
    return score;
}

/// Evaluation summary for one method on one test set.
struct Report {
    std::string method;  // "entropy" | "psd"
    std::size_t n_frames = 0;
    double single_sample_accuracy = 0.0;
    Confusion confusion;
    // trial-level block, meaningful in preparation mode
    std::size_t n_trials = 0;
    std::size_t excluded_ongoing = 0;
    double correct_rate = 0.0;
    double incorrect_rate = 0.0;
    double missed_rate = 0.0;
    double delay_mean = 0.0;
    double delay_std = 0.0;

    void fill_trials(const TrialScore& score) {
        n_trials = score.outcomes.size();
        excluded_ongoing = score.excluded_ongoing;
        if (n_trials == 0) return;
        std::size_t c = 0, ic = 0, m = 0;
        double sum = 0.0, sq = 0.0;
        for (const auto& o : score.outcomes) {
            if (o.verdict == Verdict::Correct) {
                ++c;
                sum += o.delay;
                sq += o.delay * o.delay;
            } else if (o.verdict == Verdict::Incorrect) {
                ++ic;
            } else {
                ++m;
            }
        }
        const double nt = static_cast<double>(n_trials);
        correct_rate = static_cast<double>(c) / nt;
        incorrect_rate = static_cast<double>(ic) / nt;
        missed_rate = static_cast<double>(m) / nt;
        if (c > 0) {
            delay_mean = sum / static_cast<double>(c);
            const double var = c > 1 ? (sq - sum * sum / static_cast<double>(c)) / static_cast<double>(c - 1)
                                     : 0.0;
            delay_std = std::sqrt(std::max(var, 0.0));
        }
    }
};

/// Side-by-side method comparison on the same test frames.
struct ComparisonTable {
    Report entropy;
    Report psd;
};

inline ComparisonTable compare_methods(const Report& entropy_report, const Report& psd_report) {
    require(entropy_report.n_frames == psd_report.n_frames,
            "mismatched frame sets: " + std::to_string(entropy_report.n_frames) + " vs " +
                std::to_string(psd_report.n_frames));
    return ComparisonTable{entropy_report, psd_report};
}

inline void write_report_text(std::ostream& os, const Report& r) {
    char buf[160];
    os << "method: " << r.method << "\n";
    std::snprintf(buf, sizeof buf, "single_sample_accuracy: %.4f  (n_frames=%zu)",
                  r.single_sample_accuracy, r.n_frames);
    os << buf << "\n";
    std::snprintf(buf, sizeof buf, "per-class accuracy: IC %.4f  INC %.4f", r.confusion.accuracy_ic(),
                  r.confusion.accuracy_inc());
    os << buf << "\n";
    if (r.n_trials > 0) {
        std::snprintf(buf, sizeof buf,
                      "trials: %zu  correct %.3f  incorrect %.3f  missed %.3f  delay %.2f +/- %.2f s  "
                      "(excluded ongoing-IC: %zu)",
                      r.n_trials, r.correct_rate, r.incorrect_rate, r.missed_rate, r.delay_mean,
                      r.delay_std, r.excluded_ongoing);
        os << buf << "\n";
    }
}

inline void write_report_csv(const std::string& path, const std::vector<Report>& reports) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "method,single_sample_accuracy,acc_ic,acc_inc,n_frames,n_trials,correct,incorrect,missed,"
         "delay_mean,delay_std,excluded_ongoing\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%zu",
                      r.method.c_str(), r.single_sample_accuracy, r.confusion.accuracy_ic(),
                      r.confusion.accuracy_inc(), r.n_frames, r.n_trials, r.correct_rate,
                      r.incorrect_rate, r.missed_rate, r.delay_mean, r.delay_std, r.excluded_ongoing);
        f << buf << "\n";
    }
}

} // namespace icdet
