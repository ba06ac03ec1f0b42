#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tnm/common.hpp"
#include "tnm/dataset.hpp"
#include "tnm/dynamics.hpp"
#include "tnm/forecast.hpp"
#include "tnm/model.hpp"
#include "tnm/training.hpp"

namespace tnm {

inline constexpr int kConfigFormatVersion = 1;

struct ModelConfig {
    int d = 3;
    int D = 8;
    ParamMode mode = ParamMode::Inhomogeneous;
    std::uint64_t seed = 42;
};

struct EvalConfig {
    /// Unset: resolved per model mode (1.9 homogeneous, 2.1 inhomogeneous).
    std::optional<double> horizon_threshold;
    double lambda1 = kLorenzLambda1;
    int forecast_steps = 120;
};

/// Everything one experiment needs; every field has a default, unknown
/// keys in a config document are rejected.
struct ExperimentConfig {
    FlowSpec flow;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    std::string output_dir = "out";
};

struct SweepConfig {
    ExperimentConfig base;
    std::vector<int> bond_dimensions{2, 3, 4, 5, 6, 7, 8};
    std::vector<ParamMode> modes{ParamMode::Homogeneous, ParamMode::Inhomogeneous};
    int epochs = 200;
    std::vector<std::uint64_t> seeds{0, 1, 2};
};

inline std::string to_string(FlowKind kind) {
    return kind == FlowKind::Lorenz ? "lorenz" : "rossler";
}

inline FlowKind flow_kind_from_string(const std::string& s) {
    if (s == "lorenz") return FlowKind::Lorenz;
    if (s == "rossler") return FlowKind::Rossler;
    throw ConfigError("unknown flow kind '" + s + "' (expected lorenz or rossler)");
}

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError("config: '" + context + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return key == a;
            }) == allowed.end())
            throw ConfigError("config: unknown key '" + key + "' in " + context);
    }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

inline void parse_flow(const nlohmann::json& j, FlowSpec& flow) {
    check_keys(j, {"kind", "lorenz", "rossler", "h", "sample_every", "n_samples", "x0",
                   "transient_steps"},
               "flow");
    if (j.contains("kind")) flow.kind = flow_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("lorenz")) {
        const auto& l = j.at("lorenz");
        check_keys(l, {"sigma", "rho", "beta"}, "flow.lorenz");
        flow.lorenz.sigma = get_or(l, "sigma", flow.lorenz.sigma);
        flow.lorenz.rho = get_or(l, "rho", flow.lorenz.rho);
        flow.lorenz.beta = get_or(l, "beta", flow.lorenz.beta);
    }
    if (j.contains("rossler")) {
        const auto& r = j.at("rossler");
        check_keys(r, {"a", "b", "c"}, "flow.rossler");
        flow.rossler.a = get_or(r, "a", flow.rossler.a);
        flow.rossler.b = get_or(r, "b", flow.rossler.b);
        flow.rossler.c = get_or(r, "c", flow.rossler.c);
    }
    flow.h = get_or(j, "h", flow.h);
    flow.sample_every = get_or(j, "sample_every", flow.sample_every);
    flow.n_samples = get_or(j, "n_samples", flow.n_samples);
    if (j.contains("x0")) {
        const auto& x0 = j.at("x0");
        if (!x0.is_array() || x0.size() != 3)
            throw ConfigError("config: flow.x0 must be a 3-element array");
        flow.x0 = {x0[0].get<double>(), x0[1].get<double>(), x0[2].get<double>()};
    }
    flow.transient_steps = get_or<long>(j, "transient_steps", flow.transient_steps);

    if (flow.h <= 0.0) throw ConfigError("config: flow.h must be positive");
    if (flow.sample_every < 1) throw ConfigError("config: flow.sample_every must be >= 1");
    if (flow.n_samples < kWindowLength + 1)
        throw ConfigError("config: flow.n_samples must be >= " +
                          std::to_string(kWindowLength + 1) + " (one window)");
    if (flow.transient_steps < 0)
        throw ConfigError("config: flow.transient_steps must be >= 0");
}

inline void parse_experiment(const nlohmann::json& j, ExperimentConfig& cfg) {
    check_keys(j, {"format_version", "flow", "model", "train", "eval", "output_dir"},
               "config");
    if (j.contains("format_version") &&
        j.at("format_version").get<int>() != kConfigFormatVersion)
        throw ConfigError("config: unsupported format_version (expected " +
                          std::to_string(kConfigFormatVersion) + ")");
    if (j.contains("flow")) parse_flow(j.at("flow"), cfg.flow);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, {"d", "D", "mode", "seed"}, "model");
        cfg.model.d = get_or(m, "d", cfg.model.d);
        cfg.model.D = get_or(m, "D", cfg.model.D);
        if (m.contains("mode"))
            cfg.model.mode = param_mode_from_string(m.at("mode").get<std::string>());
        cfg.model.seed = get_or(m, "seed", cfg.model.seed);
        if (cfg.model.d < 1 || cfg.model.D < 1)
            throw ConfigError("config: model.d and model.D must be >= 1");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, {"learning_rate", "epochs", "beta1", "beta2", "epsilon", "seed",
                       "batch_size"},
                   "train");
        cfg.train.learning_rate = get_or(t, "learning_rate", cfg.train.learning_rate);
        cfg.train.epochs = get_or(t, "epochs", cfg.train.epochs);
        cfg.train.beta1 = get_or(t, "beta1", cfg.train.beta1);
        cfg.train.beta2 = get_or(t, "beta2", cfg.train.beta2);
        cfg.train.epsilon = get_or(t, "epsilon", cfg.train.epsilon);
        cfg.train.seed = get_or(t, "seed", cfg.train.seed);
        cfg.train.batch_size = get_or(t, "batch_size", cfg.train.batch_size);
        if (cfg.train.learning_rate <= 0.0)
            throw ConfigError("config: train.learning_rate must be positive");
        if (cfg.train.epochs < 0) throw ConfigError("config: train.epochs must be >= 0");
        if (cfg.train.beta1 <= 0.0 || cfg.train.beta1 >= 1.0 || cfg.train.beta2 <= 0.0 ||
            cfg.train.beta2 >= 1.0)
            throw ConfigError("config: train.beta1/beta2 must lie in (0, 1)");
        if (cfg.train.batch_size < 0)
            throw ConfigError("config: train.batch_size must be >= 0");
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"horizon_threshold", "lambda1", "forecast_steps"}, "eval");
        if (e.contains("horizon_threshold"))
            cfg.eval.horizon_threshold = e.at("horizon_threshold").get<double>();
        cfg.eval.lambda1 = get_or(e, "lambda1", cfg.eval.lambda1);
        cfg.eval.forecast_steps = get_or(e, "forecast_steps", cfg.eval.forecast_steps);
        if (cfg.eval.horizon_threshold && *cfg.eval.horizon_threshold <= 0.0)
            throw ConfigError("config: eval.horizon_threshold must be positive");
        if (cfg.eval.forecast_steps < 0)
            throw ConfigError("config: eval.forecast_steps must be >= 0");
    }
    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        detail::parse_experiment(j, cfg);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is malformed: ") + e.what());
    }
    return cfg;
}

inline SweepConfig parse_sweep_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep config is not valid JSON: ") + e.what());
    }
    SweepConfig sweep;
    try {
        detail::check_keys(
            j, {"format_version", "base", "bond_dimensions", "modes", "epochs", "seeds"},
            "sweep config");
        if (j.contains("format_version") &&
            j.at("format_version").get<int>() != kConfigFormatVersion)
            throw ConfigError("sweep config: unsupported format_version");
        if (j.contains("base")) detail::parse_experiment(j.at("base"), sweep.base);
        if (j.contains("bond_dimensions"))
            sweep.bond_dimensions = j.at("bond_dimensions").get<std::vector<int>>();
        if (j.contains("modes")) {
            sweep.modes.clear();
            for (const auto& m : j.at("modes"))
                sweep.modes.push_back(param_mode_from_string(m.get<std::string>()));
        }
        sweep.epochs = detail::get_or(j, "epochs", sweep.epochs);
        if (j.contains("seeds"))
            sweep.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep config is malformed: ") + e.what());
    }
    if (sweep.bond_dimensions.empty())
        throw ConfigError("sweep config: bond_dimensions must be nonempty");
    for (int D : sweep.bond_dimensions)
        if (D < 1) throw ConfigError("sweep config: bond dimensions must be >= 1");
    if (sweep.modes.empty()) throw ConfigError("sweep config: modes must be nonempty");
    if (sweep.seeds.empty()) throw ConfigError("sweep config: seeds must be nonempty");
    if (sweep.epochs < 0) throw ConfigError("sweep config: epochs must be >= 0");
    return sweep;
}

inline std::string emit_experiment_config(const ExperimentConfig& cfg, int indent = 0) {
    const std::string pad(indent, ' ');
    std::ostringstream os;
    os << pad << "{\n";
    os << pad << "  \"format_version\": " << kConfigFormatVersion << ",\n";
    os << pad << "  \"flow\": {\n";
    os << pad << "    \"kind\": \"" << to_string(cfg.flow.kind) << "\",\n";
    os << pad << "    \"lorenz\": {\"sigma\": " << format_double(cfg.flow.lorenz.sigma)
       << ", \"rho\": " << format_double(cfg.flow.lorenz.rho)
       << ", \"beta\": " << format_double(cfg.flow.lorenz.beta) << "},\n";
    os << pad << "    \"rossler\": {\"a\": " << format_double(cfg.flow.rossler.a)
       << ", \"b\": " << format_double(cfg.flow.rossler.b)
       << ", \"c\": " << format_double(cfg.flow.rossler.c) << "},\n";
    os << pad << "    \"h\": " << format_double(cfg.flow.h) << ",\n";
    os << pad << "    \"sample_every\": " << cfg.flow.sample_every << ",\n";
    os << pad << "    \"n_samples\": " << cfg.flow.n_samples << ",\n";
    os << pad << "    \"x0\": [" << format_double(cfg.flow.x0.x) << ", "
       << format_double(cfg.flow.x0.y) << ", " << format_double(cfg.flow.x0.z) << "],\n";
    os << pad << "    \"transient_steps\": " << cfg.flow.transient_steps << "\n";
    os << pad << "  },\n";
    os << pad << "  \"model\": {\"d\": " << cfg.model.d << ", \"D\": " << cfg.model.D
       << ", \"mode\": \"" << to_string(cfg.model.mode) << "\", \"seed\": " << cfg.model.seed
       << "},\n";
    os << pad << "  \"train\": {\"learning_rate\": " << format_double(cfg.train.learning_rate)
       << ", \"epochs\": " << cfg.train.epochs
       << ", \"beta1\": " << format_double(cfg.train.beta1)
       << ", \"beta2\": " << format_double(cfg.train.beta2)
       << ", \"epsilon\": " << format_double(cfg.train.epsilon)
       << ", \"seed\": " << cfg.train.seed
       << ", \"batch_size\": " << cfg.train.batch_size << "},\n";
    os << pad << "  \"eval\": {";
    if (cfg.eval.horizon_threshold)
        os << "\"horizon_threshold\": " << format_double(*cfg.eval.horizon_threshold)
           << ", ";
    os << "\"lambda1\": " << format_double(cfg.eval.lambda1)
       << ", \"forecast_steps\": " << cfg.eval.forecast_steps << "},\n";
    os << pad << "  \"output_dir\": " << nlohmann::json(cfg.output_dir).dump() << "\n";
    os << pad << "}";
    if (indent == 0) os << "\n";
    return os.str();
}

inline std::string emit_sweep_config(const SweepConfig& sweep) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"format_version\": " << kConfigFormatVersion << ",\n";
    os << "  \"base\":\n" << emit_experiment_config(sweep.base, 2) << ",\n";
    os << "  \"bond_dimensions\": [";
    for (std::size_t i = 0; i < sweep.bond_dimensions.size(); ++i)
        os << (i ? ", " : "") << sweep.bond_dimensions[i];
    os << "],\n  \"modes\": [";
    for (std::size_t i = 0; i < sweep.modes.size(); ++i)
        os << (i ? ", " : "") << '"' << to_string(sweep.modes[i]) << '"';
    os << "],\n  \"epochs\": " << sweep.epochs << ",\n  \"seeds\": [";
    for (std::size_t i = 0; i < sweep.seeds.size(); ++i)
        os << (i ? ", " : "") << sweep.seeds[i];
    os << "]\n}\n";
    return os.str();
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Commands. Each returns the produced file paths plus the in-memory results.
// ---------------------------------------------------------------------------

namespace detail {

inline std::filesystem::path ensure_output_dir(const ExperimentConfig& cfg) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double resolve_threshold(const ExperimentConfig& cfg, ParamMode mode) {
    if (cfg.eval.horizon_threshold) return *cfg.eval.horizon_threshold;
    return mode == ParamMode::Homogeneous ? 1.9 : 2.1;
}

}  // namespace detail

struct GenerateResult {
    std::string trajectory_csv;
    int n_samples = 0;
    double dt = 0.0;
};

inline GenerateResult run_generate(const ExperimentConfig& cfg) {
    const Trajectory traj = generate_trajectory(cfg.flow);
    const auto dir = detail::ensure_output_dir(cfg);
    GenerateResult r;
    r.trajectory_csv = (dir / "trajectory.csv").string();
    r.n_samples = static_cast<int>(traj.states.size());
    r.dt = traj.dt_sample;
    write_trajectory_csv(traj, r.trajectory_csv);
    return r;
}

struct TrainResult {
    std::string model_file;
    std::string losses_csv;
    TrainReport report;
};

/// Trains on the configured flow (or a previously exported trajectory)
/// and saves a self-contained model plus the loss curves.
inline TrainResult run_train(const ExperimentConfig& cfg,
                             const std::string& trajectory_csv = "") {
    if (cfg.model.d != 3)
        throw ConfigError("run_train: model.d must be 3 for phase-space data");
    const Trajectory traj = trajectory_csv.empty() ? generate_trajectory(cfg.flow)
                                                   : read_trajectory_csv(trajectory_csv);
    const SplitDataset data = prepare_dataset(traj);

    TnmModel model = build_model(cfg.model.d, cfg.model.D, cfg.model.mode, cfg.model.seed);
    model.scaler = data.scaler;

    TrainResult r;
    r.report = fit(model, data, cfg.train);

    const auto dir = detail::ensure_output_dir(cfg);
    r.model_file = (dir / "model.json").string();
    r.losses_csv = (dir / "losses.csv").string();
    save_model(model, r.model_file);
    write_losses_csv(r.report, r.losses_csv);
    return r;
}

enum class SplitChoice { Train, Val, Test };

inline std::string to_string(SplitChoice split) {
    switch (split) {
        case SplitChoice::Train: return "train";
        case SplitChoice::Val: return "val";
        case SplitChoice::Test: return "test";
    }
    throw Error("unknown split choice");
}

inline SplitChoice split_choice_from_string(const std::string& s) {
    if (s == "train") return SplitChoice::Train;
    if (s == "val") return SplitChoice::Val;
    if (s == "test") return SplitChoice::Test;
    throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

struct EvaluateResult {
    std::string summary_json;
    std::string predictions_csv;
    std::string histogram_csv;
    std::string cdf_csv;
    EvalReport report;
};

inline constexpr int kHistogramBins = 50;

/// One-step evaluation of a saved model on the chosen split of the
/// configured flow. Pairs are standardized with the model's embedded
/// scaler; all emitted metrics are in original units.
inline EvaluateResult run_evaluate(const std::string& model_file,
                                   const ExperimentConfig& cfg, SplitChoice split) {
    const TnmModel model = load_model(model_file);
    if (model.topology.d != 3)
        throw ShapeError("run_evaluate: model feature dimension must be 3");

    const Trajectory traj = generate_trajectory(cfg.flow);
    const Splits raw = split_chronological(build_windows(traj));
    const std::vector<WindowPair>* block = nullptr;
    switch (split) {
        case SplitChoice::Train: block = &raw.train; break;
        case SplitChoice::Val: block = &raw.val; break;
        case SplitChoice::Test: block = &raw.test; break;
    }
    std::vector<WindowPair> standardized;
    standardized.reserve(block->size());
    for (const WindowPair& p : *block) standardized.push_back(transform(model.scaler, p));

    EvaluateResult r;
    r.report = predict_one_step(model, standardized);

    const auto dir = detail::ensure_output_dir(cfg);
    r.predictions_csv = (dir / "evaluation.csv").string();
    r.histogram_csv = (dir / "histogram.csv").string();
    r.cdf_csv = (dir / "cdf.csv").string();
    r.summary_json = (dir / "evaluation_summary.json").string();

    write_stepwise_csv(r.report.truth, r.report.predicted, r.report.errors,
                       running_rmse(r.report.errors), r.predictions_csv);

    {
        std::ofstream out(r.histogram_csv);
        if (!out) throw Error("cannot open " + r.histogram_csv);
        out << "bin_left,bin_right,count\n";
        const double max_err = *std::max_element(r.report.errors.begin(),
                                                 r.report.errors.end());
        const double width = max_err > 0.0 ? max_err / kHistogramBins : 1.0;
        std::array<std::size_t, kHistogramBins> counts{};
        for (double e : r.report.errors) {
            int bin = static_cast<int>(e / width);
            if (bin >= kHistogramBins) bin = kHistogramBins - 1;
            ++counts[bin];
        }
        for (int b = 0; b < kHistogramBins; ++b)
            out << format_double(b * width) << ',' << format_double((b + 1) * width) << ','
                << counts[b] << '\n';
    }
    {
        std::ofstream out(r.cdf_csv);
        if (!out) throw Error("cannot open " + r.cdf_csv);
        out << "delta,fraction\n";
        for (const auto& [value, fraction] : r.report.cdf_points)
            out << format_double(value) << ',' << format_double(fraction) << '\n';
    }
    {
        std::ostringstream os;
        os << "{\n";
        os << "  \"split\": \"" << to_string(split) << "\",\n";
        os << "  \"n_pairs\": " << r.report.errors.size() << ",\n";
        os << "  \"rmse\": " << format_double(r.report.rmse) << ",\n";
        os << "  \"fraction_below_1\": " << format_double(r.report.fraction_below_1)
           << "\n}\n";
        write_text_file(r.summary_json, os.str());
    }
    return r;
}

struct ForecastResult {
    std::string forecast_csv;
    std::string summary_json;
    ForecastReport report;
};

/// Recursive forecast over the test block: the seed window is the first
/// seven raw test states, truth is what follows.
inline ForecastResult run_forecast(const std::string& model_file,
                                   const ExperimentConfig& cfg) {
    const TnmModel model = load_model(model_file);
    if (model.topology.d != 3)
        throw ShapeError("run_forecast: model feature dimension must be 3");

    const Trajectory traj = generate_trajectory(cfg.flow);
    const std::vector<WindowPair> pairs = build_windows(traj);
    const Splits raw = split_chronological(pairs);
    const std::size_t test_start_pair = raw.train.size() + raw.val.size();

    std::array<State3, kWindowLength> seed{};
    for (int j = 0; j < kWindowLength; ++j) seed[j] = traj.states[test_start_pair + j];
    const std::size_t truth_begin = test_start_pair + kWindowLength;
    const std::size_t available = traj.states.size() - truth_begin;
    if (static_cast<std::size_t>(cfg.eval.forecast_steps) > available)
        throw DataError("run_forecast: test block holds " + std::to_string(available) +
                        " states after the seed window, config asks for " +
                        std::to_string(cfg.eval.forecast_steps));
    const std::vector<State3> truth(traj.states.begin() + truth_begin,
                                    traj.states.begin() + truth_begin +
                                        cfg.eval.forecast_steps);

    ForecastOptions opts;
    opts.threshold = detail::resolve_threshold(cfg, model.mode);
    opts.lambda1 = cfg.eval.lambda1;
    opts.dt = traj.dt_sample;

    ForecastResult r;
    r.report = recursive_forecast(model, seed, cfg.eval.forecast_steps, truth, opts);

    const auto dir = detail::ensure_output_dir(cfg);
    r.forecast_csv = (dir / "forecast.csv").string();
    r.summary_json = (dir / "forecast_summary.json").string();
    write_stepwise_csv(r.report.truth, r.report.predicted, r.report.errors, r.report.crmse,
                       r.forecast_csv);
    {
        std::ostringstream os;
        os << "{\n";
        os << "  \"n_steps\": " << r.report.predicted.size() << ",\n";
        os << "  \"threshold\": " << format_double(r.report.threshold) << ",\n";
        os << "  \"lambda1\": " << format_double(r.report.lambda1) << ",\n";
        os << "  \"dt\": " << format_double(r.report.dt) << ",\n";
        os << "  \"horizon_steps\": " << r.report.horizon_steps << ",\n";
        os << "  \"horizon_lyapunov\": " << format_double(r.report.horizon_lyapunov)
           << ",\n";
        os << "  \"final_crmse\": "
           << format_double(r.report.crmse.empty() ? 0.0 : r.report.crmse.back()) << "\n}\n";
        write_text_file(r.summary_json, os.str());
    }
    return r;
}

/// Standardized-unit MSE of a model over a split (exposed for reports).
inline double mse_on(const TnmModel& model, std::span<const WindowPair> pairs) {
    std::vector<FeatureVector> preds, targets;
    preds.reserve(pairs.size());
    targets.reserve(pairs.size());
    for (const WindowPair& p : pairs) {
        preds.push_back(predict(model, to_features(p)));
        targets.push_back(to_feature(p.target));
    }
    return mse(preds, targets);
}

struct SweepCell {
    int D = 0;
    ParamMode mode = ParamMode::Homogeneous;
    std::uint64_t seed = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::string status = "ok";
};

struct SweepResult {
    std::string sweep_csv;
    std::vector<SweepCell> cells;
};

/// Trains every (D, mode, seed) combination for sweep.epochs epochs.
/// Cells run concurrently (jobs threads, 0 = hardware concurrency); the
/// dataset is generated once and shared read-only. Failed cells are
/// recorded in the status column, not fatal.
inline SweepResult run_sweep(const SweepConfig& sweep, int jobs = 0) {
    if (sweep.base.model.d != 3)
        throw ConfigError("run_sweep: model.d must be 3 for phase-space data");
    const Trajectory traj = generate_trajectory(sweep.base.flow);
    const SplitDataset data = prepare_dataset(traj);

    SweepResult result;
    for (int D : sweep.bond_dimensions)
        for (ParamMode mode : sweep.modes)
            for (std::uint64_t seed : sweep.seeds)
                result.cells.push_back(SweepCell{D, mode, seed});

    TrainConfig train_cfg = sweep.base.train;
    train_cfg.epochs = sweep.epochs;

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= result.cells.size()) return;
            SweepCell& cell = result.cells[i];
            try {
                TnmModel model =
                    build_model(sweep.base.model.d, cell.D, cell.mode, cell.seed);
                model.scaler = data.scaler;
                const TrainReport rep = fit(model, data, train_cfg);
                cell.train_loss = rep.train_loss.empty() ? mse_on(model, data.train)
                                                         : rep.train_loss.back();
                cell.val_loss =
                    rep.val_loss.empty() ? mse_on(model, data.val) : rep.val_loss.back();
            } catch (const std::exception& e) {
                cell.train_loss = std::numeric_limits<double>::quiet_NaN();
                cell.val_loss = std::numeric_limits<double>::quiet_NaN();
                std::string msg = e.what();
                for (char& c : msg)
                    if (c == ',' || c == '\n') c = ';';
                cell.status = "failed: " + msg;
            }
        }
    };

    unsigned n_threads = jobs > 0 ? static_cast<unsigned>(jobs)
                                  : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads,
                                   static_cast<unsigned>(result.cells.size()) + 1u);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    const auto dir = detail::ensure_output_dir(sweep.base);
    result.sweep_csv = (dir / "sweep.csv").string();
    std::ofstream out(result.sweep_csv);
    if (!out) throw Error("cannot open " + result.sweep_csv);
    out << "D,mode,seed,train_loss,val_loss,status\n";
    for (const SweepCell& c : result.cells)
        out << c.D << ',' << to_string(c.mode) << ',' << c.seed << ','
            << format_double(c.train_loss) << ',' << format_double(c.val_loss) << ','
            << c.status << '\n';
    if (!out) throw Error("write failed for " + result.sweep_csv);
    return result;
}

}  // namespace tnm
