// Command-line surface for the IC/INC detection toolkit:
//   simulate  generate a labeled synthetic session
//   train     labels -> features -> CVA -> classifier -> calibration
//   evaluate  offline scoring of a trained model on held-out runs
//   stream    frame-by-frame online replay with throughput report

#include <CLI11.hpp>

#include <iostream>

#include "icdet/icdet.hpp"

namespace {

void add_config_flags(CLI::App* cmd, icdet::PipelineConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--mode", [&cfg](const std::vector<std::string>& v) {
        if (v.front() == "execution") cfg.mode = icdet::LabelingMode::Execution;
        else if (v.front() == "preparation") cfg.mode = icdet::LabelingMode::Preparation;
        else throw CLI::ValidationError("--mode must be execution or preparation");
        return true;
    }, "labeling mode: execution | preparation");
    cmd->add_option("--method", cfg.method, "feature method: entropy | psd");
    cmd->add_option("--entropy-bins", cfg.entropy.bins, "histogram bin count");
    cmd->add_option("--tau", cfg.selection.tau, "CVA cumulative-mass threshold");
    cmd->add_option("--select-floor", cfg.selection.floor_count, "minimum selected features");
    cmd->add_option("--select-cap", cfg.selection.cap, "maximum selected features");
    cmd->add_option("--np", cfg.prototypes_per_class, "Gaussian prototypes per class");
    cmd->add_option("--lr", cfg.learning_rate, "SGD learning rate");
    cmd->add_option("--epochs", cfg.epochs, "SGD epochs");
    cmd->add_option("--emg-threshold-left", cfg.emg_threshold_left, "left forearm envelope threshold");
    cmd->add_option("--emg-threshold-right", cfg.emg_threshold_right, "right forearm envelope threshold");
    cmd->add_option("--emg-smooth", cfg.emg_smooth_seconds, "EMG envelope smoothing (s)");
    cmd->add_option("--notch", cfg.notch_hz, "mains notch frequency, 0 = off");
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
}

icdet::PipelineConfig finalize_config(const CLI::App* cmd, icdet::PipelineConfig flags_cfg,
                                      const std::string& config_path) {
    if (config_path.empty()) {
        flags_cfg.validate();
        return flags_cfg;
    }
    // Config file first, explicit flags win.
    icdet::PipelineConfig cfg = icdet::load_config(config_path);
    auto touched = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (touched("--seed")) cfg.seed = flags_cfg.seed;
    if (touched("--mode")) cfg.mode = flags_cfg.mode;
    if (touched("--method")) cfg.method = flags_cfg.method;
    if (touched("--entropy-bins")) cfg.entropy.bins = flags_cfg.entropy.bins;
    if (touched("--tau")) cfg.selection.tau = flags_cfg.selection.tau;
    if (touched("--select-floor")) cfg.selection.floor_count = flags_cfg.selection.floor_count;
    if (touched("--select-cap")) cfg.selection.cap = flags_cfg.selection.cap;
    if (touched("--np")) cfg.prototypes_per_class = flags_cfg.prototypes_per_class;
    if (touched("--lr")) cfg.learning_rate = flags_cfg.learning_rate;
    if (touched("--epochs")) cfg.epochs = flags_cfg.epochs;
    if (touched("--emg-threshold-left")) cfg.emg_threshold_left = flags_cfg.emg_threshold_left;
    if (touched("--emg-threshold-right")) cfg.emg_threshold_right = flags_cfg.emg_threshold_right;
    if (touched("--emg-smooth")) cfg.emg_smooth_seconds = flags_cfg.emg_smooth_seconds;
    if (touched("--notch")) cfg.notch_hz = flags_cfg.notch_hz;
    if (touched("--threads")) cfg.threads = flags_cfg.threads;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-based intentional-control (IC/INC) detector"};
    app.require_subcommand(1);

    // --- simulate -------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a synthetic labeled session");
    icdet::SimulateArgs sim_args;
    std::string sim_montage = "FPc";
    sim->add_option("--out", sim_args.out_prefix, "output file prefix")->required();
    sim->add_option("--seed", sim_args.spec.seed, "generator seed");
    sim->add_option("--runs", sim_args.spec.n_runs, "number of runs");
    sim->add_option("--trials", sim_args.spec.trials_per_condition, "trials per condition per run");
    sim->add_option("--delta", sim_args.spec.delta, "class contrast strength in [0,1]");
    sim->add_option("--montage", sim_montage, "montage: Mc | FPc");
    sim->add_option("--contrast-channels", sim_args.spec.contrast_channels,
                    "channels carrying the class contrast (default: frontal+parietal rows)");

    // --- train ----------------------------------------------------------
    auto* train = app.add_subcommand("train", "train a detector on the first runs of a session");
    icdet::TrainArgs train_args;
    icdet::PipelineConfig train_flags;
    std::string train_config_path, train_runs_text = "1-3";
    train->add_option("--session", train_args.session_prefix, "session file prefix")->required();
    train->add_option("--out", train_args.out_dir, "output directory");
    train->add_option("--train-runs", train_runs_text, "1-based runs used for training (default 1-3)");
    train->add_flag("--dump-features", train_args.dump_features, "write the full feature table CSV");
    train->add_flag("--dump-labels", train_args.dump_labels, "write the label timeline CSV");
    add_config_flags(train, train_flags, train_config_path);

    // --- evaluate ---------------------------------------------------------
    auto* eval = app.add_subcommand("evaluate", "score a trained model on held-out runs");
    icdet::EvaluateArgs eval_args;
    icdet::PipelineConfig eval_flags;
    std::string eval_config_path, eval_runs_text = "4-5";
    eval->add_option("--session", eval_args.session_prefix, "session file prefix")->required();
    eval->add_option("--model", eval_args.model_path, "trained model JSON")->required();
    eval->add_option("--compare-model", eval_args.compare_model_path,
                     "second model for a side-by-side method comparison");
    eval->add_option("--out", eval_args.out_dir, "output directory");
    eval->add_option("--test-runs", eval_runs_text, "1-based runs used for testing (default 4-5)");
    add_config_flags(eval, eval_flags, eval_config_path);

    // --- stream -----------------------------------------------------------
    auto* stream = app.add_subcommand("stream", "replay a session frame by frame");
    icdet::StreamArgs stream_args;
    std::string stream_runs_text;
    stream->add_option("--session", stream_args.session_prefix, "session file prefix")->required();
    stream->add_option("--model", stream_args.model_path, "trained model JSON")->required();
    stream->add_option("--runs", stream_runs_text, "1-based runs to replay (default: all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            sim_args.spec.montage = icdet::Montage::by_name(sim_montage);
            icdet::cmd_simulate(sim_args);
            std::cerr << "wrote session files at prefix " << sim_args.out_prefix << "\n";
        } else if (train->parsed()) {
            train_args.config = finalize_config(train, train_flags, train_config_path);
            train_args.train_runs = icdet::parse_run_list(train_runs_text);
            const auto summary = icdet::cmd_train(train_args);
            std::cerr << "model: " << summary.model_path << "\nselected features: " << summary.n_selected
                      << "\ncalibrated alpha=" << summary.alpha << " th=" << summary.th
                      << " (cv accuracy " << summary.calibration_accuracy << ")\n";
        } else if (eval->parsed()) {
            eval_args.config = finalize_config(eval, eval_flags, eval_config_path);
            eval_args.test_runs = icdet::parse_run_list(eval_runs_text);
            const auto result = icdet::cmd_evaluate(eval_args);
            icdet::write_report_text(std::cout, result.report);
        } else if (stream->parsed()) {
            if (!stream_runs_text.empty()) stream_args.runs = icdet::parse_run_list(stream_runs_text);
            icdet::cmd_stream(stream_args, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
