#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "icdet/core.hpp"
#include "icdet/cva.hpp"

namespace icdet {

/// Exponential evidence integrator with hysteresis. D accumulates evidence
/// for IC; the emitted label changes only when D leaves the (1-th, th)
/// band. Initial state is INC at D = 0.5, the fail-safe for a prosthesis.
struct IntegratorState {
    double d = 0.5;
    double alpha = 0.9;
    double th = 0.65;
    Label label = Label::Inc;

    void validate() const {
        require(alpha >= 0.0 && alpha < 1.0, "alpha must lie in [0, 1)");
        require(th > 0.5 && th < 1.0, "threshold must lie in (0.5, 1)");
        require(d >= 0.0 && d <= 1.0, "evidence must lie in [0, 1]");
    }
};

/// One integration step: D <- alpha*D + (1-alpha)*p_ic, then threshold
/// with hysteresis. Returns the emitted label.
inline Label integrate_step(IntegratorState& state, double p_ic) {
    require(p_ic >= 0.0 && p_ic <= 1.0, "posterior outside [0, 1]");
    state.d = state.alpha * state.d + (1.0 - state.alpha) * p_ic;
    if (state.d > state.th)
        state.label = Label::Ic;
    else if (state.d < 1.0 - state.th)
        state.label = Label::Inc;
    return state.label;
}

struct DecisionTrace {
    std::vector<double> t_end;
    std::vector<double> p_ic;
    std::vector<double> d;
    std::vector<Label> label;

    std::size_t size() const { return p_ic.size(); }
};

inline DecisionTrace run_trace(const std::vector<double>& posteriors, double alpha, double th,
                               double d0 = 0.5, Label label0 = Label::Inc) {
    IntegratorState state{d0, alpha, th, label0};
    state.validate();
    DecisionTrace trace;
    trace.p_ic = posteriors;
    trace.t_end.resize(posteriors.size(), 0.0);
    trace.d.reserve(posteriors.size());
    trace.label.reserve(posteriors.size());
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        trace.t_end[i] = static_cast<double>(i);
        const Label l = integrate_step(state, posteriors[i]);
        trace.d.push_back(state.d);
        trace.label.push_back(l);
    }
    return trace;
}

/// `t,p_ic,D,label` rows, the source data for integrated-probability plots.
inline void write_trace_csv(const std::string& path, const DecisionTrace& trace) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "t,p_ic,D,label\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%s", trace.t_end[i], trace.p_ic[i], trace.d[i],
                      label_name(trace.label[i]));
        f << buf << "\n";
    }
}

struct CalibrationGrid {
    std::vector<double> alphas;
    std::vector<double> ths;

    /// alpha in 0.50..0.95, th in 0.55..0.90, both in steps of 0.05.
    static CalibrationGrid canonical() {
        CalibrationGrid g;
        for (int i = 0; i <= 9; ++i) g.alphas.push_back(0.50 + 0.05 * i);
        for (int i = 0; i <= 7; ++i) g.ths.push_back(0.55 + 0.05 * i);
        return g;
    }
};

/// One held-out stream for calibration: per-frame IC posteriors with
/// ground-truth labels; frames with included=false are not scored (the
/// preparation task trains on a subset of frames).
struct CalibrationStream {
    std::vector<double> posteriors;
    std::vector<Label> labels;
    std::vector<bool> included;
};

struct CalibrationResult {
    double alpha = 0.0;
    double th = 0.0;
    double accuracy = 0.0;
};

/// Grid search: every (alpha, th) pair is scored by single-sample accuracy
/// of the integrated trace against the stream labels, accumulated over all
/// streams. Ties prefer the larger alpha, then the larger th.
inline CalibrationResult calibrate(const std::vector<CalibrationStream>& streams,
                                   const CalibrationGrid& grid) {
    require(!grid.alphas.empty() && !grid.ths.empty(), "calibration grid is empty");
    for (const auto& s : streams) {
        require(s.posteriors.size() == s.labels.size(), "stream posterior/label length mismatch");
        require(s.included.empty() || s.included.size() == s.labels.size(),
                "stream included mask length mismatch");
    }
    CalibrationResult best;
    bool first = true;
    for (double alpha : grid.alphas) {
        for (double th : grid.ths) {
            std::size_t correct = 0, total = 0;
            for (const auto& s : streams) {
                IntegratorState state{0.5, alpha, th, Label::Inc};
                for (std::size_t i = 0; i < s.posteriors.size(); ++i) {
                    const Label l = integrate_step(state, s.posteriors[i]);
                    if (!s.included.empty() && !s.included[i]) continue;
                    ++total;
                    if (l == s.labels[i]) ++correct;
                }
            }
            const double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
            const bool better =
                first || acc > best.accuracy ||
                (acc == best.accuracy &&
                 (alpha > best.alpha || (alpha == best.alpha && th > best.th)));
            if (better) {
                best = {alpha, th, acc};
                first = false;
            }
        }
    }
    return best;
}

} // namespace icdet
