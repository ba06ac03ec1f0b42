#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnm/common.hpp"
#include "tnm/dataset.hpp"
#include "tnm/model.hpp"

namespace tnm {

/// Lorenz largest Lyapunov exponent (cited constant, not computed here).
inline constexpr double kLorenzLambda1 = 0.9056;

/// Empirical CDF sampled at the sorted unique error values.
inline std::vector<std::pair<double, double>> cdf(std::span<const double> errors) {
    if (errors.empty()) throw DataError("cdf: empty error sequence");
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> points;
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const bool last_of_value = i + 1 == sorted.size() || sorted[i + 1] != sorted[i];
        if (last_of_value)
            points.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
    }
    return points;
}

/// One-step evaluation metrics in original (de-standardized) units.
struct EvalReport {
    double rmse = 0.0;
    std::vector<double> errors;  // pointwise Euclidean errors, pair order
    std::vector<std::pair<double, double>> cdf_points;
    double fraction_below_1 = 0.0;
    std::vector<State3> predicted;  // original units, pair order
    std::vector<State3> truth;
};

namespace detail {

inline double euclidean_error(const State3& a, const State3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Metric computation shared by the model path and stub-prediction tests.
inline EvalReport make_eval_report(std::vector<State3> predicted,
                                   std::vector<State3> truth) {
    if (predicted.empty() || predicted.size() != truth.size())
        throw DataError("make_eval_report: need equal, nonempty sequences");
    EvalReport r;
    r.predicted = std::move(predicted);
    r.truth = std::move(truth);
    r.errors.reserve(r.predicted.size());
    double sumsq = 0.0;
    std::size_t below = 0;
    for (std::size_t i = 0; i < r.predicted.size(); ++i) {
        const double d = euclidean_error(r.predicted[i], r.truth[i]);
        r.errors.push_back(d);
        sumsq += d * d;
        if (d <= 1.0) ++below;
    }
    r.rmse = std::sqrt(sumsq / static_cast<double>(r.errors.size()));
    r.cdf_points = cdf(r.errors);
    r.fraction_below_1 = static_cast<double>(below) / static_cast<double>(r.errors.size());
    return r;
}

}  // namespace detail

/// Forward every standardized window, map predictions and targets back to
/// original units with the model's embedded scaler, and compute RMSE,
/// pointwise errors, CDF and P(delta <= 1).
inline EvalReport predict_one_step(const TnmModel& model, std::span<const WindowPair> pairs) {
    if (model.topology.d != 3)
        throw ShapeError("predict_one_step: model feature dimension must be 3");
    if (pairs.empty()) throw DataError("predict_one_step: no pairs to evaluate");
    std::vector<State3> predicted, truth;
    predicted.reserve(pairs.size());
    truth.reserve(pairs.size());
    for (const WindowPair& p : pairs) {
        const FeatureVector pred = predict(model, to_features(p));
        predicted.push_back(inverse_transform(model.scaler, to_state(pred)));
        truth.push_back(inverse_transform(model.scaler, p.target));
    }
    return detail::make_eval_report(std::move(predicted), std::move(truth));
}

/// Running RMSE over the first k autonomous steps:
/// crmse[k] = sqrt(k^{-1} sum_{i<=k} delta_i^2).
inline std::vector<double> running_rmse(std::span<const double> errors) {
    std::vector<double> out;
    out.reserve(errors.size());
    double sumsq = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        sumsq += errors[i] * errors[i];
        out.push_back(std::sqrt(sumsq / static_cast<double>(i + 1)));
    }
    return out;
}

/// Largest k such that crmse[i] < threshold for all i <= k.
inline int horizon(std::span<const double> crmse, double threshold) {
    if (threshold <= 0.0) throw ConfigError("horizon: threshold must be positive");
    int k = 0;
    for (double v : crmse) {
        if (!(v < threshold)) break;
        ++k;
    }
    return k;
}

/// Number of Lyapunov times spanned by `steps` samples of spacing dt.
inline double lyapunov_times(int steps, double dt, double lambda1) {
    if (dt <= 0.0) throw ConfigError("lyapunov_times: dt must be positive");
    return static_cast<double>(steps) * dt * lambda1;
}

struct ForecastOptions {
    double threshold = 2.1;
    double lambda1 = kLorenzLambda1;
    double dt = 0.1;
};

/// Autoregressive rollout results in original units.
struct ForecastReport {
    std::vector<State3> predicted;
    std::vector<State3> truth;
    std::vector<double> errors;  // per-step Euclidean errors
    std::vector<double> crmse;
    int horizon_steps = 0;
    double horizon_lyapunov = 0.0;
    double lambda1 = kLorenzLambda1;
    double dt = 0.1;
    double threshold = 2.1;
};

namespace detail {

/// Metrics for a rollout already in original units (stub-testable).
inline ForecastReport make_forecast_report(std::vector<State3> predicted,
                                           std::vector<State3> truth,
                                           const ForecastOptions& opts) {
    if (predicted.size() != truth.size())
        throw DataError("make_forecast_report: prediction/truth length mismatch");
    ForecastReport r;
    r.predicted = std::move(predicted);
    r.truth = std::move(truth);
    r.errors.reserve(r.predicted.size());
    for (std::size_t i = 0; i < r.predicted.size(); ++i)
        r.errors.push_back(euclidean_error(r.predicted[i], r.truth[i]));
    r.crmse = running_rmse(r.errors);
    r.horizon_steps = horizon(r.crmse, opts.threshold);
    r.horizon_lyapunov = lyapunov_times(r.horizon_steps, opts.dt, opts.lambda1);
    r.lambda1 = opts.lambda1;
    r.dt = opts.dt;
    r.threshold = opts.threshold;
    return r;
}

}  // namespace detail

/// Recursive forecasting: standardize the seed window, repeatedly forward
/// and feed the prediction back as the newest window entry, then compare
/// the de-standardized rollout against the truth.
inline ForecastReport recursive_forecast(const TnmModel& model,
                                         const std::array<State3, kWindowLength>& seed_window,
                                         int n_steps, std::span<const State3> truth,
                                         const ForecastOptions& opts) {
    if (model.topology.d != 3)
        throw ShapeError("recursive_forecast: model feature dimension must be 3");
    if (n_steps < 0) throw ConfigError("recursive_forecast: n_steps must be >= 0");
    if (static_cast<std::size_t>(n_steps) > truth.size())
        throw DataError("recursive_forecast: requested " + std::to_string(n_steps) +
                        " steps but only " + std::to_string(truth.size()) +
                        " truth states are available");

    std::vector<FeatureVector> window;
    window.reserve(kWindowLength);
    for (const State3& s : seed_window)
        window.push_back(to_feature(transform(model.scaler, s)));

    std::vector<State3> predicted;
    predicted.reserve(n_steps);
    for (int step = 0; step < n_steps; ++step) {
        FeatureVector pred = predict(model, window);
        predicted.push_back(inverse_transform(model.scaler, to_state(pred)));
        window.erase(window.begin());
        window.push_back(std::move(pred));
    }
    return detail::make_forecast_report(
        std::move(predicted), std::vector<State3>(truth.begin(), truth.begin() + n_steps),
        opts);
}

/// Writes `step,true_x,true_y,true_z,pred_x,pred_y,pred_z,delta,crmse`.
/// For one-step evaluation reports the crmse column holds the running
/// RMSE over the evaluated pairs.
inline void write_stepwise_csv(std::span<const State3> truth,
                               std::span<const State3> predicted,
                               std::span<const double> errors,
                               std::span<const double> crmse, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_stepwise_csv: cannot open " + path);
    out << "step,true_x,true_y,true_z,pred_x,pred_y,pred_z,delta,crmse\n";
    for (std::size_t i = 0; i < truth.size(); ++i) {
        out << (i + 1) << ',' << format_double(truth[i].x) << ','
            << format_double(truth[i].y) << ',' << format_double(truth[i].z) << ','
            << format_double(predicted[i].x) << ',' << format_double(predicted[i].y)
            << ',' << format_double(predicted[i].z) << ',' << format_double(errors[i])
            << ',' << format_double(crmse[i]) << '\n';
    }
    if (!out) throw Error("write_stepwise_csv: write failed for " + path);
}

}  // namespace tnm
