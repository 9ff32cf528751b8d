#pragma once

#include <chrono>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "icdet/classifier.hpp"
#include "icdet/cva.hpp"
#include "icdet/decision.hpp"
#include "icdet/eval.hpp"
#include "icdet/features.hpp"
#include "icdet/io.hpp"
#include "icdet/labeling.hpp"
#include "icdet/simgen.hpp"

namespace icdet {

using json = nlohmann::json;

/// Everything the train/evaluate/stream workflows need, in one place.
/// Defaults follow the canonical protocol values.
struct PipelineConfig {
    std::vector<BandSpec> bands = canonical_bands();
    FramerSpec framer;
    EntropySpec entropy;
    PsdSpec psd;
    SelectionPolicy selection;
    std::size_t prototypes_per_class = 4;
    double learning_rate = 0.01;
    int epochs = 20;
    bool train_variances = false;
    CalibrationGrid grid = CalibrationGrid::canonical();
    double emg_threshold_left = 0.25;
    double emg_threshold_right = 0.25;
    double emg_smooth_seconds = 0.25;
    double emg_closing_seconds = 0.2;
    LabelingMode mode = LabelingMode::Execution;
    std::string method = "entropy";  // "entropy" | "psd"
    double notch_hz = 0.0;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const {
        require(!bands.empty(), "config: bands must not be empty");
        require(entropy.bins >= 2, "config: entropy_bins must be >= 2");
        require(selection.tau > 0.0 && selection.tau <= 1.0, "config: selection tau must be in (0, 1]");
        require(selection.floor_count >= 1 && selection.floor_count <= selection.cap,
                "config: selection floor/cap invalid");
        require(prototypes_per_class >= 1, "config: prototypes_per_class must be >= 1");
        require(learning_rate >= 0.0, "config: learning_rate must be >= 0");
        require(epochs >= 0, "config: epochs must be >= 0");
        require(!grid.alphas.empty() && !grid.ths.empty(), "config: calibration grid must not be empty");
        for (double a : grid.alphas) require(a >= 0.0 && a < 1.0, "config: grid alpha outside [0, 1)");
        for (double t : grid.ths) require(t > 0.5 && t < 1.0, "config: grid th outside (0.5, 1)");
        require(emg_threshold_left > 0.0 && emg_threshold_right > 0.0,
                "config: EMG thresholds must be positive");
        require(emg_smooth_seconds > 0.0, "config: EMG smoothing must be positive");
        require(emg_closing_seconds >= 0.0, "config: EMG closing must be >= 0");
        require(method == "entropy" || method == "psd", "config: method must be entropy or psd");
        require(notch_hz >= 0.0, "config: notch_hz must be >= 0");
    }

    FeatureOptions feature_options() const {
        FeatureOptions o;
        o.apply_car = true;
        o.notch_hz = notch_hz;
        o.threads = threads;
        return o;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + ctx);
    }
}

} // namespace detail

inline json config_to_json(const PipelineConfig& c) {
    json j;
    json bands = json::array();
    for (const auto& b : c.bands) bands.push_back({b.low, b.high});
    j["bands"] = bands;
    j["window_seconds"] = c.framer.window_seconds;
    j["shift_seconds"] = c.framer.shift_seconds;
    j["entropy_bins"] = c.entropy.bins;
    j["selection"] = {{"tau", c.selection.tau}, {"floor", c.selection.floor_count}, {"cap", c.selection.cap}};
    j["classifier"] = {{"prototypes_per_class", c.prototypes_per_class},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"train_variances", c.train_variances}};
    j["grid"] = {{"alpha", c.grid.alphas}, {"th", c.grid.ths}};
    j["emg"] = {{"threshold_left", c.emg_threshold_left},
                {"threshold_right", c.emg_threshold_right},
                {"smooth_seconds", c.emg_smooth_seconds},
                {"closing_seconds", c.emg_closing_seconds}};
    j["labeling_mode"] = c.mode == LabelingMode::Execution ? "execution" : "preparation";
    j["feature_method"] = c.method;
    j["notch_hz"] = c.notch_hz;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    detail::reject_unknown_keys(j,
                                {"bands", "window_seconds", "shift_seconds", "entropy_bins", "selection",
                                 "classifier", "grid", "emg", "labeling_mode", "feature_method",
                                 "notch_hz", "seed", "threads"},
                                "top level");
    if (j.contains("bands")) {
        c.bands.clear();
        for (const auto& b : j.at("bands")) {
            require(b.is_array() && b.size() == 2, "config: each band must be [low, high]");
            const double lo = b[0].get<double>(), hi = b[1].get<double>();
            char name[32];
            std::snprintf(name, sizeof name, "%g-%g", lo, hi);
            c.bands.push_back({lo, hi, name});
        }
    }
    if (j.contains("window_seconds")) c.framer.window_seconds = j.at("window_seconds").get<double>();
    if (j.contains("shift_seconds")) c.framer.shift_seconds = j.at("shift_seconds").get<double>();
    if (j.contains("entropy_bins")) c.entropy.bins = j.at("entropy_bins").get<int>();
    if (j.contains("selection")) {
        const auto& s = j.at("selection");
        detail::reject_unknown_keys(s, {"tau", "floor", "cap"}, "selection");
        if (s.contains("tau")) c.selection.tau = s.at("tau").get<double>();
        if (s.contains("floor")) c.selection.floor_count = s.at("floor").get<std::size_t>();
        if (s.contains("cap")) c.selection.cap = s.at("cap").get<std::size_t>();
    }
    if (j.contains("classifier")) {
        const auto& s = j.at("classifier");
        detail::reject_unknown_keys(s, {"prototypes_per_class", "learning_rate", "epochs", "train_variances"},
                                    "classifier");
        if (s.contains("prototypes_per_class"))
            c.prototypes_per_class = s.at("prototypes_per_class").get<std::size_t>();
        if (s.contains("learning_rate")) c.learning_rate = s.at("learning_rate").get<double>();
        if (s.contains("epochs")) c.epochs = s.at("epochs").get<int>();
        if (s.contains("train_variances")) c.train_variances = s.at("train_variances").get<bool>();
    }
    if (j.contains("grid")) {
        const auto& s = j.at("grid");
        detail::reject_unknown_keys(s, {"alpha", "th"}, "grid");
        if (s.contains("alpha")) c.grid.alphas = s.at("alpha").get<std::vector<double>>();
        if (s.contains("th")) c.grid.ths = s.at("th").get<std::vector<double>>();
    }
    if (j.contains("emg")) {
        const auto& s = j.at("emg");
        detail::reject_unknown_keys(s, {"threshold_left", "threshold_right", "smooth_seconds", "closing_seconds"},
                                    "emg");
        if (s.contains("threshold_left")) c.emg_threshold_left = s.at("threshold_left").get<double>();
        if (s.contains("threshold_right")) c.emg_threshold_right = s.at("threshold_right").get<double>();
        if (s.contains("smooth_seconds")) c.emg_smooth_seconds = s.at("smooth_seconds").get<double>();
        if (s.contains("closing_seconds")) c.emg_closing_seconds = s.at("closing_seconds").get<double>();
    }
    if (j.contains("labeling_mode")) {
        const auto m = j.at("labeling_mode").get<std::string>();
        require(m == "execution" || m == "preparation", "config: labeling_mode must be execution or preparation");
        c.mode = m == "execution" ? LabelingMode::Execution : LabelingMode::Preparation;
    }
    if (j.contains("feature_method")) c.method = j.at("feature_method").get<std::string>();
    if (j.contains("notch_hz")) c.notch_hz = j.at("notch_hz").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    c.validate();
    return c;
}

/// Serialized product of training: selection, normalization, prototypes
/// and the calibrated integrator parameters.
struct TrainedDetector {
    int version = 1;
    std::string method = "entropy";
    LabelingMode mode = LabelingMode::Execution;
    unsigned sample_rate = 512;
    std::vector<std::string> channels;
    std::vector<BandSpec> bands;
    FramerSpec framer;
    EntropySpec entropy;
    PsdSpec psd;
    double notch_hz = 0.0;
    std::vector<FeatureId> selected;
    GaussianClassifier clf;
    double alpha = 0.9;
    double th = 0.65;

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        if (method == "psd") {
            for (double f : psd.bin_frequencies(sample_rate)) {
                char b[24];
                std::snprintf(b, sizeof b, "%gHz", f);
                names.push_back(b);
            }
        } else {
            for (const auto& b : bands) names.push_back(b.name);
        }
        return names;
    }
};

inline json detector_to_json(const TrainedDetector& m) {
    json j;
    j["version"] = m.version;
    j["method"] = m.method;
    j["labeling_mode"] = m.mode == LabelingMode::Execution ? "execution" : "preparation";
    j["sample_rate"] = m.sample_rate;
    j["channels"] = m.channels;
    json bands = json::array();
    for (const auto& b : m.bands) bands.push_back({b.low, b.high});
    j["bands"] = bands;
    j["window_seconds"] = m.framer.window_seconds;
    j["shift_seconds"] = m.framer.shift_seconds;
    j["entropy_bins"] = m.entropy.bins;
    j["notch_hz"] = m.notch_hz;
    json sel = json::array();
    for (const auto& s : m.selected) sel.push_back({{"channel", s.channel}, {"column", s.band}});
    j["selected"] = sel;
    j["alpha"] = m.alpha;
    j["th"] = m.th;
    json clf;
    clf["prototypes_per_class"] = m.clf.n_p;
    clf["dim"] = m.clf.dim;
    clf["norm_mean"] = m.clf.feature_norm.mean;
    clf["norm_std"] = m.clf.feature_norm.stddev;
    for (int c = 0; c < 2; ++c) {
        json protos = json::array();
        for (const auto& p : m.clf.prototypes[static_cast<std::size_t>(c)])
            protos.push_back({{"mean", p.mean}, {"variance", p.variance}});
        clf[c == 0 ? "prototypes_inc" : "prototypes_ic"] = protos;
    }
    j["classifier"] = clf;
    return j;
}

inline TrainedDetector detector_from_json(const json& j) {
    TrainedDetector m;
    m.version = j.at("version").get<int>();
    require(m.version == 1, "unsupported model version " + std::to_string(m.version));
    m.method = j.at("method").get<std::string>();
    const auto mode = j.at("labeling_mode").get<std::string>();
    m.mode = mode == "execution" ? LabelingMode::Execution : LabelingMode::Preparation;
    m.sample_rate = j.at("sample_rate").get<unsigned>();
    m.channels = j.at("channels").get<std::vector<std::string>>();
    m.bands.clear();
    for (const auto& b : j.at("bands")) {
        const double lo = b[0].get<double>(), hi = b[1].get<double>();
        char name[32];
        std::snprintf(name, sizeof name, "%g-%g", lo, hi);
        m.bands.push_back({lo, hi, name});
    }
    m.framer.window_seconds = j.at("window_seconds").get<double>();
    m.framer.shift_seconds = j.at("shift_seconds").get<double>();
    m.entropy.bins = j.at("entropy_bins").get<int>();
    m.notch_hz = j.at("notch_hz").get<double>();
    for (const auto& s : j.at("selected"))
        m.selected.push_back({s.at("channel").get<int>(), s.at("column").get<int>()});
    m.alpha = j.at("alpha").get<double>();
    m.th = j.at("th").get<double>();
    const auto& clf = j.at("classifier");
    m.clf.n_p = clf.at("prototypes_per_class").get<std::size_t>();
    m.clf.dim = clf.at("dim").get<std::size_t>();
    m.clf.feature_norm.mean = clf.at("norm_mean").get<std::vector<double>>();
    m.clf.feature_norm.stddev = clf.at("norm_std").get<std::vector<double>>();
    for (int c = 0; c < 2; ++c) {
        for (const auto& p : clf.at(c == 0 ? "prototypes_inc" : "prototypes_ic")) {
            GaussianPrototype proto;
            proto.mean = p.at("mean").get<std::vector<double>>();
            proto.variance = p.at("variance").get<std::vector<double>>();
            m.clf.prototypes[static_cast<std::size_t>(c)].push_back(std::move(proto));
        }
    }
    m.clf.validate();
    return m;
}

// ---------------------------------------------------------------------
// Run handling

struct RunSpan {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
};

/// Runs delimited by RUN_START/RUN_END events; a recording without run
/// markers counts as a single run.
inline std::vector<RunSpan> run_spans(const Recording& rec) {
    std::vector<RunSpan> spans;
    std::size_t open = 0;
    bool in_run = false;
    for (const auto& e : rec.events) {
        if (e.code == EventCode::RunStart) {
            require(!in_run, "nested RUN_START");
            open = e.sample_index;
            in_run = true;
        } else if (e.code == EventCode::RunEnd) {
            require(in_run, "RUN_END without RUN_START");
            spans.push_back({open, e.sample_index + 1});
            in_run = false;
        }
    }
    require(!in_run, "unterminated run");
    if (spans.empty()) spans.push_back({0, rec.n_samples()});
    return spans;
}

/// Copy of one run with events shifted into run-local indices.
inline Recording slice_run(const Recording& rec, const RunSpan& span) {
    Recording out;
    out.sample_rate = rec.sample_rate;
    out.channels = rec.channels;
    out.samples = Matrix(span.end - span.start, rec.n_channels());
    for (std::size_t r = span.start; r < span.end; ++r)
        for (std::size_t c = 0; c < rec.n_channels(); ++c) out.samples(r - span.start, c) = rec.samples(r, c);
    for (const auto& e : rec.events) {
        if (e.sample_index < span.start || e.sample_index >= span.end) continue;
        out.events.push_back({e.sample_index - span.start, e.code});
    }
    return out;
}

inline std::vector<std::uint8_t> slice_mask(const std::vector<std::uint8_t>& mask, const RunSpan& span) {
    return std::vector<std::uint8_t>(mask.begin() + static_cast<std::ptrdiff_t>(span.start),
                                     mask.begin() + static_cast<std::ptrdiff_t>(span.end));
}

/// EMG activity mask resampled onto the EEG sample clock.
inline std::vector<std::uint8_t> emg_mask_on_eeg(const Recording& eeg, const EmgChannelPair& emg,
                                                 const PipelineConfig& cfg) {
    const auto mask = activity_mask(emg, cfg.emg_threshold_left, cfg.emg_threshold_right,
                                    cfg.emg_smooth_seconds, cfg.emg_closing_seconds);
    return resample_mask(mask, emg.rate, eeg.sample_rate, eeg.n_samples());
}

// ---------------------------------------------------------------------
// Training

struct RunData {
    std::size_t run_index = 0;
    RunSpan span;
    FeatureTable table;   // all frames of this run
    LabelTimeline labels; // aligned with table rows
};

struct TrainResult {
    TrainedDetector model;
    CvaModel cva;
    std::vector<FeatureId> feature_names;  // full grid naming for the map
    CalibrationResult calibration;
    std::size_t n_train_frames = 0;
    std::vector<double> epoch_mse;
};

namespace detail {

inline std::vector<FrameFeatures> extract_frames(const Recording& rec, const PipelineConfig& cfg) {
    if (cfg.method == "psd") return extract_psd_features(rec, cfg.framer, cfg.psd, cfg.feature_options());
    return extract_entropy_features(rec, cfg.bands, cfg.framer, cfg.entropy, cfg.feature_options());
}

inline RunData build_run_data(const Recording& rec, const std::vector<std::uint8_t>& mask_eeg,
                              const PipelineConfig& cfg, std::size_t run_index, const RunSpan& span) {
    RunData rd;
    rd.run_index = run_index;
    rd.span = span;
    const Recording run = slice_run(rec, span);
    rd.table = flatten_features(detail::extract_frames(run, cfg));
    rd.labels = build_labels(run, slice_mask(mask_eeg, span), cfg.framer, cfg.mode);
    // timestamps into session time
    const double off = static_cast<double>(span.start) / static_cast<double>(rec.sample_rate);
    for (auto& t : rd.table.t_end) t += off;
    for (auto& t : rd.labels.t_end) t += off;
    return rd;
}

inline void stack_included(const std::vector<const RunData*>& runs, const std::vector<FeatureId>& names,
                           Matrix& X, std::vector<Label>& y) {
    std::size_t rows = 0;
    for (const auto* rd : runs) rows += rd->labels.n_included();
    const std::size_t p = names.size();
    X = Matrix(rows, p);
    y.clear();
    y.reserve(rows);
    std::size_t r = 0;
    for (const auto* rd : runs) {
        for (std::size_t f = 0; f < rd->labels.labels.size(); ++f) {
            if (!rd->labels.included[f]) continue;
            for (std::size_t j = 0; j < p; ++j) X(r, j) = rd->table.X(f, j);
            y.push_back(rd->labels.labels[f]);
            ++r;
        }
    }
}

inline Matrix select_columns(const Matrix& X, const std::vector<std::size_t>& cols) {
    Matrix out(X.rows(), cols.size());
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = X(i, cols[j]);
    return out;
}

inline GaussianClassifier fit_classifier(const Matrix& X_sel, const std::vector<Label>& y,
                                         const PipelineConfig& cfg, std::uint64_t seed,
                                         std::vector<double>* epoch_mse = nullptr) {
    GaussianClassifier clf = make_classifier(X_sel, y, cfg.prototypes_per_class, seed);
    TrainOptions opts;
    opts.learning_rate = cfg.learning_rate;
    opts.epochs = cfg.epochs;
    opts.seed = seed ^ 0x5851f42d4c957f2dULL;
    opts.train_variances = cfg.train_variances;
    const Matrix Xn = clf.feature_norm.apply(X_sel);
    auto mse = train(clf, Xn, y, opts);
    if (epoch_mse) *epoch_mse = std::move(mse);
    return clf;
}

} // namespace detail

/// Full training workflow on the given runs (0-based indices into the
/// session's run list): EMG labeling, feature extraction, CVA selection,
/// prototype classifier training and (alpha, th) grid calibration with
/// 3-fold cross-validation split by run.
inline TrainResult train_detector(const Recording& eeg, const EmgChannelPair& emg,
                                  const PipelineConfig& cfg, const std::vector<std::size_t>& train_runs) {
    cfg.validate();
    eeg.validate();
    const auto spans = run_spans(eeg);
    require(train_runs.size() >= 3, "training needs at least 3 runs for 3-fold calibration, got " +
                                        std::to_string(train_runs.size()));
    for (std::size_t r : train_runs)
        require(r < spans.size(), "train run index " + std::to_string(r) + " out of range (session has " +
                                      std::to_string(spans.size()) + " runs)");

    const auto mask_eeg = emg_mask_on_eeg(eeg, emg, cfg);

    std::vector<RunData> runs;
    runs.reserve(train_runs.size());
    for (std::size_t r : train_runs) runs.push_back(detail::build_run_data(eeg, mask_eeg, cfg, r, spans[r]));

    // CVA on all included training frames.
    std::vector<const RunData*> all;
    for (const auto& rd : runs) all.push_back(&rd);
    LabeledFeatureSet lfs;
    lfs.feature_names = runs.front().table.names;
    detail::stack_included(all, lfs.feature_names, lfs.X, lfs.y);
    require(lfs.X.rows() >= 4, "too few labeled frames for training");

    TrainResult result;
    result.cva = fit_cva(lfs);
    const auto selected_idx = select_features(result.cva, cfg.selection);
    result.feature_names = lfs.feature_names;

    std::vector<FeatureId> selected;
    for (std::size_t j : selected_idx) selected.push_back(lfs.feature_names[j]);

    // Final classifier on every training frame.
    const Matrix X_sel = detail::select_columns(lfs.X, selected_idx);
    GaussianClassifier clf = detail::fit_classifier(X_sel, lfs.y, cfg, cfg.seed, &result.epoch_mse);
    result.n_train_frames = X_sel.rows();

    // 3-fold calibration split by run: train on two folds, integrate the
    // held-out run streams, score single-sample accuracy.
    const std::size_t n_folds = 3;
    std::vector<std::vector<std::size_t>> folds(n_folds);
    for (std::size_t i = 0; i < runs.size(); ++i) folds[i % n_folds].push_back(i);

    std::vector<CalibrationStream> streams;
    for (std::size_t fold = 0; fold < n_folds; ++fold) {
        if (folds[fold].empty()) continue;
        std::vector<const RunData*> fit_runs;
        for (std::size_t other = 0; other < n_folds; ++other) {
            if (other == fold) continue;
            for (std::size_t i : folds[other]) fit_runs.push_back(&runs[i]);
        }
        Matrix Xf;
        std::vector<Label> yf;
        detail::stack_included(fit_runs, lfs.feature_names, Xf, yf);
        const GaussianClassifier fold_clf =
            detail::fit_classifier(detail::select_columns(Xf, selected_idx), yf, cfg, cfg.seed + fold + 1);
        for (std::size_t i : folds[fold]) {
            const RunData& rd = runs[i];
            CalibrationStream s;
            s.labels = rd.labels.labels;
            s.included.assign(rd.labels.included.begin(), rd.labels.included.end());
            s.posteriors.reserve(rd.table.X.rows());
            std::vector<double> x(selected_idx.size());
            for (std::size_t f = 0; f < rd.table.X.rows(); ++f) {
                for (std::size_t j = 0; j < selected_idx.size(); ++j) x[j] = rd.table.X(f, selected_idx[j]);
                s.posteriors.push_back(posterior_ic(fold_clf, fold_clf.feature_norm.apply(x)));
            }
            streams.push_back(std::move(s));
        }
    }
    result.calibration = calibrate(streams, cfg.grid);

    TrainedDetector model;
    model.method = cfg.method;
    model.mode = cfg.mode;
    model.sample_rate = eeg.sample_rate;
    model.channels = eeg.channels;
    model.bands = cfg.bands;
    model.framer = cfg.framer;
    model.entropy = cfg.entropy;
    model.psd = cfg.psd;
    model.notch_hz = cfg.notch_hz;
    model.selected = std::move(selected);
    model.clf = std::move(clf);
    model.alpha = result.calibration.alpha;
    model.th = result.calibration.th;
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------
// Inference

/// Per-frame IC posteriors for one run slice, identical for the offline
/// and streaming paths.
struct RunPosteriors {
    std::size_t run_index = 0;
    std::vector<double> t_end;  // session-absolute seconds
    std::vector<double> p_ic;
};

namespace detail {

/// Frame scorer over a run slice; visit() is called in frame order.
inline void score_run_frames(const TrainedDetector& model, const Recording& run, double t_offset,
                             const std::function<void(double, double)>& visit) {
    const auto frames = frame_indices(run.n_samples(), model.framer, run.sample_rate);
    const double sr = static_cast<double>(run.sample_rate);
    FeatureOptions opts;
    opts.notch_hz = model.notch_hz;
    if (model.method == "psd") {
        const auto feats = extract_psd_features(run, model.framer, model.psd, opts);
        const auto table = flatten_features(feats);
        std::vector<double> x(model.selected.size());
        const std::size_t n_cols = feats.empty() ? 0 : feats.front().values.cols();
        for (std::size_t f = 0; f < table.X.rows(); ++f) {
            for (std::size_t j = 0; j < model.selected.size(); ++j) {
                const auto& id = model.selected[j];
                x[j] = table.X(f, static_cast<std::size_t>(id.channel) * n_cols +
                                      static_cast<std::size_t>(id.band));
            }
            visit(t_offset + table.t_end[f], posterior_ic(model.clf, model.clf.feature_norm.apply(x)));
        }
        return;
    }
    const SelectedFeatureExtractor extractor(model.bands, model.framer, model.entropy, model.selected,
                                             run.sample_rate, opts);
    for (const auto& [start, end] : frames) {
        const auto x = extractor.compute(run.samples, start, end);
        visit(t_offset + static_cast<double>(end) / sr,
              posterior_ic(model.clf, model.clf.feature_norm.apply(x)));
    }
}

} // namespace detail

inline void check_montage(const TrainedDetector& model, const Recording& eeg) {
    require(model.sample_rate == eeg.sample_rate,
            "model/montage mismatch: model expects " + std::to_string(model.sample_rate) + " Hz, recording is " +
                std::to_string(eeg.sample_rate) + " Hz");
    require(model.channels == eeg.channels, "model/montage mismatch: channel lists differ");
}

inline std::vector<RunPosteriors> compute_posteriors(const TrainedDetector& model, const Recording& eeg,
                                                     const std::vector<std::size_t>& run_indices) {
    check_montage(model, eeg);
    const auto spans = run_spans(eeg);
    std::vector<RunPosteriors> out;
    for (std::size_t r : run_indices) {
        require(r < spans.size(), "run index " + std::to_string(r) + " out of range");
        const Recording run = slice_run(eeg, spans[r]);
        RunPosteriors rp;
        rp.run_index = r;
        const double off = static_cast<double>(spans[r].start) / static_cast<double>(eeg.sample_rate);
        detail::score_run_frames(model, run, off, [&](double t, double p) {
            rp.t_end.push_back(t);
            rp.p_ic.push_back(p);
        });
        out.push_back(std::move(rp));
    }
    return out;
}

/// Integrated decision trace per run; the integrator resets at run starts.
inline std::vector<DecisionTrace> traces_from_posteriors(const TrainedDetector& model,
                                                         const std::vector<RunPosteriors>& posts) {
    std::vector<DecisionTrace> traces;
    for (const auto& rp : posts) {
        DecisionTrace tr = run_trace(rp.p_ic, model.alpha, model.th);
        tr.t_end = rp.t_end;
        traces.push_back(std::move(tr));
    }
    return traces;
}

struct EvaluationResult {
    Report report;
    std::vector<DecisionTrace> traces;  // one per evaluated run
    TrialScore trial_score;
};

/// Offline evaluation on the given runs: ground-truth labels from EMG,
/// decision traces per run, single-sample metrics and (in preparation
/// mode) single-trial verdicts around each IC-cue onset.
inline EvaluationResult evaluate_detector(const TrainedDetector& model, const Recording& eeg,
                                          const EmgChannelPair& emg, const PipelineConfig& cfg,
                                          const std::vector<std::size_t>& run_indices) {
    check_montage(model, eeg);
    const auto spans = run_spans(eeg);
    const auto mask_eeg = emg_mask_on_eeg(eeg, emg, cfg);

    EvaluationResult result;
    const auto posts = compute_posteriors(model, eeg, run_indices);
    result.traces = traces_from_posteriors(model, posts);

    std::vector<Label> predicted;
    LabelTimeline truth;
    const double sr = static_cast<double>(eeg.sample_rate);
    for (std::size_t i = 0; i < run_indices.size(); ++i) {
        const auto& span = spans[run_indices[i]];
        const Recording run = slice_run(eeg, span);
        LabelTimeline tl = build_labels(run, slice_mask(mask_eeg, span), model.framer, model.mode);
        const double off = static_cast<double>(span.start) / sr;
        for (std::size_t f = 0; f < tl.labels.size(); ++f) {
            predicted.push_back(result.traces[i].label[f]);
            truth.labels.push_back(tl.labels[f]);
            truth.included.push_back(tl.included[f]);
            truth.t_end.push_back(tl.t_end[f] + off);
        }

        if (model.mode == LabelingMode::Preparation) {
            std::vector<double> cues;
            for (const auto& e : run.events)
                if (e.code == EventCode::IcCueOn)
                    cues.push_back(off + static_cast<double>(e.sample_index) / sr);
            const auto score = score_preparation_trials(result.traces[i], cues);
            for (auto o : score.outcomes) {
                o.trial_id = result.trial_score.outcomes.size();
                result.trial_score.outcomes.push_back(o);
            }
            result.trial_score.excluded_ongoing += score.excluded_ongoing;
        }
    }

    result.report.method = model.method;
    result.report.n_frames = truth.n_included();
    result.report.single_sample_accuracy = single_sample_accuracy(predicted, truth);
    result.report.confusion = confusion_counts(predicted, truth);
    result.report.fill_trials(result.trial_score);
    return result;
}

struct StreamStats {
    std::size_t frames = 0;
    double processed_seconds = 0.0;
    double wall_seconds = 0.0;
    double real_time_factor = 0.0;
};

/// Streaming replay: frames are processed strictly in order, one at a
/// time, emitting `t,p_ic,D,label` lines. Returns the throughput as the
/// real-time factor (processed seconds per wall second).
inline StreamStats stream_detector(const TrainedDetector& model, const Recording& eeg,
                                   const std::vector<std::size_t>& run_indices, std::ostream& out) {
    check_montage(model, eeg);
    const auto spans = run_spans(eeg);
    StreamStats stats;
    char buf[96];
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t r : run_indices) {
        require(r < spans.size(), "run index " + std::to_string(r) + " out of range");
        const Recording run = slice_run(eeg, spans[r]);
        const double off = static_cast<double>(spans[r].start) / static_cast<double>(eeg.sample_rate);
        IntegratorState state{0.5, model.alpha, model.th, Label::Inc};
        detail::score_run_frames(model, run, off, [&](double t, double p) {
            const Label l = integrate_step(state, p);
            std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%s", t, p, state.d, label_name(l));
            out << buf << '\n';
            ++stats.frames;
        });
        stats.processed_seconds += run.duration_seconds();
    }
    const auto t1 = std::chrono::steady_clock::now();
    stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    stats.real_time_factor = stats.wall_seconds > 0.0 ? stats.processed_seconds / stats.wall_seconds : 0.0;
    return stats;
}

} // namespace icdet
