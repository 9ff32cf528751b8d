#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "icdet/pipeline.hpp"

namespace icdet {

/// File-level session handle shared by the train/evaluate/stream commands.
struct Session {
    Recording eeg;
    EmgChannelPair emg;
};

inline Session load_session(const std::string& prefix) {
    const auto paths = SessionPaths::at(prefix);
    Session s;
    s.eeg = read_recording(paths.eeg_signal, paths.eeg_events);
    const Recording emg_rec = read_recording(paths.emg_signal, paths.emg_events);
    require(emg_rec.n_channels() == 2, "EMG recording must have exactly 2 channels");
    s.emg.rate = emg_rec.sample_rate;
    s.emg.left = emg_rec.samples.column(0);
    s.emg.right = emg_rec.samples.column(1);
    return s;
}

inline void save_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

inline std::string load_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void save_detector(const TrainedDetector& model, const std::string& path) {
    save_text(path, detector_to_json(model).dump(2) + "\n");
}

inline TrainedDetector load_detector(const std::string& path) {
    return detector_from_json(json::parse(load_text(path)));
}

inline PipelineConfig load_config(const std::string& path) {
    return config_from_json(json::parse(load_text(path)));
}

/// 1-based inclusive run range ("1-3") or comma list ("1,2,3") to 0-based.
inline std::vector<std::size_t> parse_run_list(const std::string& text) {
    std::vector<std::size_t> out;
    const auto dash = text.find('-');
    if (dash != std::string::npos) {
        const std::size_t lo = std::stoul(text.substr(0, dash));
        const std::size_t hi = std::stoul(text.substr(dash + 1));
        require(lo >= 1 && lo <= hi, "invalid run range: " + text);
        for (std::size_t r = lo; r <= hi; ++r) out.push_back(r - 1);
        return out;
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const std::size_t r = std::stoul(part);
        require(r >= 1, "run numbers are 1-based: " + text);
        out.push_back(r - 1);
    }
    require(!out.empty(), "empty run list");
    return out;
}

// ---------------------------------------------------------------------

struct SimulateArgs {
    SessionSpec spec;
    std::string out_prefix = "session";
};

inline void cmd_simulate(const SimulateArgs& args) {
    const GeneratedSession session = generate_session(args.spec);
    write_session(session, args.out_prefix);
}

struct TrainArgs {
    std::string session_prefix;
    PipelineConfig config;
    std::vector<std::size_t> train_runs = {0, 1, 2};
    std::string out_dir = "out";
    bool dump_features = false;
    bool dump_labels = false;
};

struct TrainSummary {
    std::string model_path;
    std::size_t n_selected = 0;
    double calibration_accuracy = 0.0;
    double alpha = 0.0;
    double th = 0.0;
};

inline TrainSummary cmd_train(const TrainArgs& args) {
    const Session session = load_session(args.session_prefix);
    std::filesystem::create_directories(args.out_dir);

    const TrainResult result = train_detector(session.eeg, session.emg, args.config, args.train_runs);
    const std::string model_path = args.out_dir + "/model_" + args.config.method + ".json";
    save_detector(result.model, model_path);

    write_discrimination_csv(
        args.out_dir + "/discrimination_map_" + args.config.method + ".csv",
        discrimination_map(result.cva, result.feature_names, session.eeg.channels,
                           result.model.column_names()));

    if (args.dump_features || args.dump_labels) {
        const auto mask = emg_mask_on_eeg(session.eeg, session.emg, args.config);
        if (args.dump_features) {
            const auto frames = detail::extract_frames(session.eeg, args.config);
            write_feature_csv(args.out_dir + "/features_" + args.config.method + ".csv", frames,
                              session.eeg.channels, result.model.column_names());
        }
        if (args.dump_labels) {
            const auto tl = build_labels(session.eeg, mask, args.config.framer, args.config.mode);
            write_label_csv(args.out_dir + "/labels.csv", tl);
        }
    }

    TrainSummary summary;
    summary.model_path = model_path;
    summary.n_selected = result.model.selected.size();
    summary.calibration_accuracy = result.calibration.accuracy;
    summary.alpha = result.model.alpha;
    summary.th = result.model.th;
    return summary;
}

struct EvaluateArgs {
    std::string session_prefix;
    std::string model_path;
    std::string compare_model_path;  // optional second model for the side-by-side table
    PipelineConfig config;
    std::vector<std::size_t> test_runs = {3, 4};
    std::string out_dir = "out";
};

inline EvaluationResult cmd_evaluate(const EvaluateArgs& args) {
    const Session session = load_session(args.session_prefix);
    std::filesystem::create_directories(args.out_dir);
    const TrainedDetector model = load_detector(args.model_path);

    EvaluationResult result = evaluate_detector(model, session.eeg, session.emg, args.config, args.test_runs);
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
        write_trace_csv(args.out_dir + "/trace_" + model.method + "_run" +
                            std::to_string(args.test_runs[i] + 1) + ".csv",
                        result.traces[i]);
    }

    std::vector<Report> reports{result.report};
    std::ostringstream text;
    write_report_text(text, result.report);

    if (!args.compare_model_path.empty()) {
        const TrainedDetector other = load_detector(args.compare_model_path);
        const EvaluationResult other_result =
            evaluate_detector(other, session.eeg, session.emg, args.config, args.test_runs);
        const ComparisonTable cmp = model.method == "psd"
                                        ? compare_methods(other_result.report, result.report)
                                        : compare_methods(result.report, other_result.report);
        reports = {cmp.entropy, cmp.psd};
        text << "\n";
        write_report_text(text, other_result.report);
        char line[128];
        std::snprintf(line, sizeof line, "\naccuracy delta (entropy - psd): %+.4f\n",
                      cmp.entropy.single_sample_accuracy - cmp.psd.single_sample_accuracy);
        text << line;
        write_report_csv(args.out_dir + "/comparison.csv", reports);
    }

    save_text(args.out_dir + "/report_" + model.method + ".txt", text.str());
    write_report_csv(args.out_dir + "/report_" + model.method + ".csv", {result.report});
    return result;
}

struct StreamArgs {
    std::string session_prefix;
    std::string model_path;
    std::vector<std::size_t> runs;  // empty = all runs
};

inline StreamStats cmd_stream(const StreamArgs& args, std::ostream& out, std::ostream& info) {
    const Session session = load_session(args.session_prefix);
    const TrainedDetector model = load_detector(args.model_path);
    std::vector<std::size_t> runs = args.runs;
    if (runs.empty()) {
        const auto spans = run_spans(session.eeg);
        for (std::size_t r = 0; r < spans.size(); ++r) runs.push_back(r);
    }
    out << "t,p_ic,D,label\n";
    const StreamStats stats = stream_detector(model, session.eeg, runs, out);
    char line[160];
    std::snprintf(line, sizeof line,
                  "frames: %zu  processed: %.1f s  wall: %.3f s  real-time factor: %.1f\n", stats.frames,
                  stats.processed_seconds, stats.wall_seconds, stats.real_time_factor);
    info << line;
    return stats;
}

} // namespace icdet
