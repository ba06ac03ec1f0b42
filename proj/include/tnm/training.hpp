#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tnm/common.hpp"
#include "tnm/dataset.hpp"
#include "tnm/model.hpp"

namespace tnm {

/// Training losses above this value abort with DivergenceError.
inline constexpr double kDivergenceGuard = 1e6;

struct TrainConfig {
    double learning_rate = 0.001;
    int epochs = 60;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    /// Gradient-update granularity: 0 trains full-batch (one Adam update
    /// per epoch); a positive value updates on shuffled mini-batches of
    /// that size (shuffling is seeded and deterministic).
    int batch_size = 32;
};

/// Adam moment accumulators, mirroring the stored weight structure.
struct AdamState {
    ModelGradients m, v;
    std::int64_t t = 0;
};

inline AdamState make_adam_state(const TnmModel& model) {
    return AdamState{zero_gradients(model), zero_gradients(model), 0};
}

/// Mean over all samples and coordinates of the squared difference.
inline double mse(std::span<const FeatureVector> predictions,
                  std::span<const FeatureVector> targets) {
    if (predictions.empty() || predictions.size() != targets.size())
        throw DataError("mse: need equal, nonempty prediction/target sequences");
    const std::size_t d = predictions[0].size();
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].size() != d || targets[i].size() != d)
            throw ShapeError("mse: inconsistent vector dimensions");
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = predictions[i][k] - targets[i][k];
            sum += diff * diff;
        }
    }
    return sum / (static_cast<double>(predictions.size()) * static_cast<double>(d));
}

/// d(MSE)/d(prediction) for one sample of a batch of size batch_size:
/// (2 / (batch_size * d)) * (p - t).
inline FeatureVector mse_gradient(const FeatureVector& prediction,
                                  const FeatureVector& target,
                                  std::size_t batch_size = 1) {
    if (prediction.size() != target.size())
        throw ShapeError("mse_gradient: prediction/target dimension mismatch");
    const double scale =
        2.0 / (static_cast<double>(batch_size) * static_cast<double>(prediction.size()));
    FeatureVector g(prediction.size());
    for (std::size_t k = 0; k < prediction.size(); ++k)
        g[k] = scale * (prediction[k] - target[k]);
    return g;
}

/// One Adam update with bias correction; increments the step counter.
inline void adam_step(TnmModel& model, const ModelGradients& grads, AdamState& state,
                      const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        for (std::size_t t = 0; t < model.weights[l].size(); ++t) {
            std::vector<double>& theta = model.weights[l][t].values;
            const std::vector<double>& g = grads.layers[l][t].values;
            std::vector<double>& m = state.m.layers[l][t].values;
            std::vector<double>& v = state.v.layers[l][t].values;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            }
        }
    }
}

/// Per-epoch loss curves in standardized units.
struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    double wall_seconds = 0.0;
};

namespace detail {

/// Pairs pre-converted to feature vectors so the epoch loop does no
/// per-sample conversions.
struct FeaturizedSplit {
    std::vector<std::array<FeatureVector, kWindowLength>> windows;
    std::vector<FeatureVector> targets;

    explicit FeaturizedSplit(std::span<const WindowPair> pairs) {
        windows.reserve(pairs.size());
        targets.reserve(pairs.size());
        for (const WindowPair& p : pairs) {
            windows.push_back(to_features(p));
            targets.push_back(to_feature(p.target));
        }
    }
    std::size_t size() const { return windows.size(); }
};

inline double split_mse(const TnmModel& model, const FeaturizedSplit& split) {
    std::vector<FeatureVector> preds;
    preds.reserve(split.size());
    for (const auto& w : split.windows) preds.push_back(predict(model, w));
    return mse(preds, split.targets);
}

}  // namespace detail

/// Trains in place. Each epoch accumulates MSE gradients over the
/// training pairs (per batch), applies Adam, then records the post-update
/// training MSE and the validation MSE. Deterministic given the seeds.
inline TrainReport fit(TnmModel& model, const SplitDataset& data, const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw ConfigError("fit: learning_rate must be positive");
    if (cfg.epochs < 0) throw ConfigError("fit: epochs must be >= 0");
    if (cfg.batch_size < 0) throw ConfigError("fit: batch_size must be >= 0");
    if (data.train.empty() || data.val.empty())
        throw DataError("fit: train and val splits must be nonempty");

    const auto t_start = std::chrono::steady_clock::now();
    const detail::FeaturizedSplit train(data.train);
    const detail::FeaturizedSplit val(data.val);

    const std::size_t n_train = train.size();
    const std::size_t batch =
        cfg.batch_size == 0 ? n_train : std::min<std::size_t>(cfg.batch_size, n_train);

    AdamState state = make_adam_state(model);
    ModelGradients grads = zero_gradients(model);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(cfg.seed);

    TrainReport report;
    report.train_loss.reserve(cfg.epochs);
    report.val_loss.reserve(cfg.epochs);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (batch < n_train) {
            // Fisher-Yates with library-independent draws.
            for (std::size_t i = n_train - 1; i > 0; --i) {
                const std::size_t j = uniform_below(shuffle_rng, i + 1);
                std::swap(order[i], order[j]);
            }
        }
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t stop = std::min(start + batch, n_train);
            for (auto& layer : grads.layers)
                for (WeightTensor4& g : layer)
                    std::fill(g.values.begin(), g.values.end(), 0.0);
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t idx = order[i];
                const ForwardResult fr = forward(model, train.windows[idx]);
                const FeatureVector g =
                    mse_gradient(fr.prediction, train.targets[idx], stop - start);
                accumulate_backward(model, fr.cache, g, grads);
            }
            adam_step(model, grads, state, cfg);
        }

        const double train_loss = detail::split_mse(model, train);
        const double val_loss = detail::split_mse(model, val);
        if (!is_finite(train_loss) || !is_finite(val_loss) ||
            train_loss > kDivergenceGuard || val_loss > kDivergenceGuard)
            throw DivergenceError("fit: training diverged", epoch);
        report.train_loss.push_back(train_loss);
        report.val_loss.push_back(val_loss);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

/// Writes `epoch,train_loss,val_loss` rows (1-based epochs).
inline void write_losses_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_losses_csv: cannot open " + path);
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        out << (e + 1) << ',' << format_double(report.train_loss[e]) << ','
            << format_double(report.val_loss[e]) << '\n';
    }
    if (!out) throw Error("write_losses_csv: write failed for " + path);
}

}  // namespace tnm
