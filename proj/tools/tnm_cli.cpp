// Command-line driver: data generation, training, evaluation, recursive
// forecasting and the bond-dimension sweep, all config-driven and
// reproducible. Emits plot-ready CSV/JSON; exit code 0 on success,
// nonzero with a JSON error object on stderr otherwise.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tnm/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<int> bond_dim;
    std::optional<std::string> mode;
    std::optional<int> epochs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> flow;
    std::optional<std::string> out;
    std::optional<int> samples;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    cmd->add_option("--bond-dim", flags.bond_dim, "override model.D");
    cmd->add_option("--mode", flags.mode, "override model.mode")
        ->check(CLI::IsMember({"homogeneous", "inhomogeneous"}));
    cmd->add_option("--epochs", flags.epochs, "override train.epochs");
    cmd->add_option("--seed", flags.seed, "override model.seed");
    cmd->add_option("--flow", flags.flow, "override flow.kind")
        ->check(CLI::IsMember({"lorenz", "rossler"}));
    cmd->add_option("--out", flags.out, "override output_dir");
    cmd->add_option("--samples", flags.samples, "override flow.n_samples");
}

tnm::ExperimentConfig load_config(const CommonFlags& flags) {
    tnm::ExperimentConfig cfg;
    if (!flags.config_path.empty())
        cfg = tnm::parse_experiment_config(tnm::read_text_file(flags.config_path));
    if (flags.bond_dim) cfg.model.D = *flags.bond_dim;
    if (flags.mode) cfg.model.mode = tnm::param_mode_from_string(*flags.mode);
    if (flags.epochs) cfg.train.epochs = *flags.epochs;
    if (flags.seed) cfg.model.seed = *flags.seed;
    if (flags.flow) cfg.flow.kind = tnm::flow_kind_from_string(*flags.flow);
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.samples) cfg.flow.n_samples = *flags.samples;
    if (cfg.model.D < 1) throw tnm::ConfigError("model.D must be >= 1");
    if (cfg.train.epochs < 0) throw tnm::ConfigError("train.epochs must be >= 0");
    if (cfg.flow.n_samples < tnm::kWindowLength + 1)
        throw tnm::ConfigError("flow.n_samples must be >= 8");
    return cfg;
}

std::string json_escape(const std::string& s) {
    return nlohmann::json(s).dump();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree tensor network forecaster for chaotic flows"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* generate = app.add_subcommand("generate", "integrate a flow and export the trajectory");
    add_common_flags(generate, flags);

    auto* train = app.add_subcommand("train", "train a model and save it with its loss curves");
    add_common_flags(train, flags);
    std::string trajectory_csv;
    train->add_option("--trajectory", trajectory_csv,
                      "reuse a previously exported trajectory CSV")
        ->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "one-step evaluation of a saved model");
    add_common_flags(evaluate, flags);
    std::string model_file;
    std::string split = "val";
    evaluate->add_option("--model", model_file, "saved model file")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--split", split, "data split to evaluate")
        ->check(CLI::IsMember({"train", "val", "test"}));

    auto* forecast = app.add_subcommand("forecast", "recursive forecast over the test block");
    add_common_flags(forecast, flags);
    std::string forecast_model;
    std::optional<int> forecast_steps;
    std::optional<double> threshold;
    forecast->add_option("--model", forecast_model, "saved model file")
        ->required()
        ->check(CLI::ExistingFile);
    forecast->add_option("--steps", forecast_steps, "override eval.forecast_steps");
    forecast->add_option("--threshold", threshold, "override eval.horizon_threshold");

    auto* sweep = app.add_subcommand("sweep", "bond-dimension sweep over modes and seeds");
    std::string sweep_config_path;
    std::optional<std::string> sweep_out;
    std::optional<int> sweep_epochs;
    int jobs = 0;
    sweep->add_option("--config", sweep_config_path, "JSON sweep config")
        ->check(CLI::ExistingFile);
    sweep->add_option("--out", sweep_out, "override output_dir");
    sweep->add_option("--epochs", sweep_epochs, "override sweep epochs");
    sweep->add_option("--jobs", jobs, "worker threads (0 = hardware concurrency)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            const auto cfg = load_config(flags);
            const auto r = tnm::run_generate(cfg);
            std::printf("wrote %s: %d samples, dt = %s\n", r.trajectory_csv.c_str(),
                        r.n_samples, tnm::format_double(r.dt).c_str());
        } else if (train->parsed()) {
            const auto cfg = load_config(flags);
            const auto r = tnm::run_train(cfg, trajectory_csv);
            std::printf("wrote %s and %s\n", r.model_file.c_str(), r.losses_csv.c_str());
            if (!r.report.val_loss.empty())
                std::printf("final losses: train %s, val %s (%d epochs, %.1fs)\n",
                            tnm::format_double(r.report.train_loss.back()).c_str(),
                            tnm::format_double(r.report.val_loss.back()).c_str(),
                            static_cast<int>(r.report.val_loss.size()),
                            r.report.wall_seconds);
        } else if (evaluate->parsed()) {
            const auto cfg = load_config(flags);
            const auto r = tnm::run_evaluate(model_file, cfg,
                                             tnm::split_choice_from_string(split));
            std::printf("wrote %s, %s, %s, %s\n", r.predictions_csv.c_str(),
                        r.histogram_csv.c_str(), r.cdf_csv.c_str(), r.summary_json.c_str());
            std::printf("%s split: rmse %.4f, P(delta <= 1) %.4f over %zu pairs\n",
                        split.c_str(), r.report.rmse, r.report.fraction_below_1,
                        r.report.errors.size());
        } else if (forecast->parsed()) {
            auto cfg = load_config(flags);
            if (forecast_steps) cfg.eval.forecast_steps = *forecast_steps;
            if (threshold) cfg.eval.horizon_threshold = *threshold;
            const auto r = tnm::run_forecast(forecast_model, cfg);
            std::printf("wrote %s and %s\n", r.forecast_csv.c_str(),
                        r.summary_json.c_str());
            std::printf("horizon: %d steps (%.3f Lyapunov times) at CRMSE < %s\n",
                        r.report.horizon_steps, r.report.horizon_lyapunov,
                        tnm::format_double(r.report.threshold).c_str());
        } else if (sweep->parsed()) {
            tnm::SweepConfig sweep_cfg;
            if (!sweep_config_path.empty())
                sweep_cfg = tnm::parse_sweep_config(tnm::read_text_file(sweep_config_path));
            if (sweep_out) sweep_cfg.base.output_dir = *sweep_out;
            if (sweep_epochs) sweep_cfg.epochs = *sweep_epochs;
            const auto r = tnm::run_sweep(sweep_cfg, jobs);
            std::size_t failed = 0;
            for (const auto& cell : r.cells)
                if (cell.status != "ok") ++failed;
            std::printf("wrote %s: %zu cells, %zu failed\n", r.sweep_csv.c_str(),
                        r.cells.size(), failed);
        }
    } catch (const std::exception& e) {
        std::cerr << "{\"error\": " << json_escape(e.what()) << "}\n";
        return 1;
    }
    return 0;
}
