#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tnm/common.hpp"
#include "tnm/dynamics.hpp"

namespace tnm {

/// Input window width of the model (fixed by the tree topology).
inline constexpr int kWindowLength = 7;

/// One supervised sample: seven past states and the next one.
struct WindowPair {
    std::array<State3, kWindowLength> window;
    State3 target;

    bool operator==(const WindowPair&) const = default;
};

/// Per-feature standardization statistics fitted on training data.
struct Scaler {
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std{1.0, 1.0, 1.0};

    bool operator==(const Scaler&) const = default;
};

/// Lower clamp for the fitted standard deviation (constant features).
inline constexpr double kStdClamp = 1e-8;

/// Stride-1 windowing: pair k has window = states[k..k+6], target = states[k+7].
inline std::vector<WindowPair> build_windows(const Trajectory& traj) {
    const std::size_t n = traj.states.size();
    if (n < static_cast<std::size_t>(kWindowLength) + 1)
        throw DataError("build_windows: need at least " +
                        std::to_string(kWindowLength + 1) + " samples, got " +
                        std::to_string(n));
    std::vector<WindowPair> pairs(n - kWindowLength);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        for (int j = 0; j < kWindowLength; ++j) pairs[k].window[j] = traj.states[k + j];
        pairs[k].target = traj.states[k + kWindowLength];
    }
    return pairs;
}

/// Chronological, contiguous blocks in train/val/test order (pre-scaling).
struct Splits {
    std::vector<WindowPair> train, val, test;
};

inline Splits split_chronological(const std::vector<WindowPair>& pairs,
                                  std::array<double, 3> fractions = {0.4, 0.5, 0.1}) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f <= 0.0) throw ConfigError("split_chronological: fractions must be positive");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("split_chronological: fractions must sum to 1");

    const std::size_t total = pairs.size();
    const std::size_t n_train = static_cast<std::size_t>(fractions[0] * total);
    const std::size_t n_val = static_cast<std::size_t>(fractions[1] * total);
    if (n_train == 0 || n_val == 0 || n_train + n_val >= total)
        throw ConfigError("split_chronological: a split would be empty (" +
                          std::to_string(total) + " pairs)");

    Splits s;
    s.train.assign(pairs.begin(), pairs.begin() + n_train);
    s.val.assign(pairs.begin() + n_train, pairs.begin() + n_train + n_val);
    s.test.assign(pairs.begin() + n_train + n_val, pairs.end());
    return s;
}

/// Per-feature mean and population standard deviation of a state sample,
/// std clamped below at kStdClamp.
inline Scaler fit_scaler(std::span<const State3> states) {
    if (states.empty()) throw DataError("fit_scaler: empty state sample");
    Scaler sc;
    std::array<double, 3> sum{0, 0, 0}, sumsq{0, 0, 0};
    for (const State3& s : states) {
        const std::array<double, 3> v{s.x, s.y, s.z};
        for (int i = 0; i < 3; ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
        }
    }
    const double n = static_cast<double>(states.size());
    for (int i = 0; i < 3; ++i) {
        sc.mean[i] = sum[i] / n;
        const double var = sumsq[i] / n - sc.mean[i] * sc.mean[i];
        sc.std[i] = std::sqrt(var > 0.0 ? var : 0.0);
        if (sc.std[i] < kStdClamp) sc.std[i] = kStdClamp;
    }
    return sc;
}

/// Statistics over every state appearing in the training pairs — windows
/// and targets jointly, repeated appearances counted.
inline Scaler fit_scaler(std::span<const WindowPair> train) {
    if (train.empty()) throw DataError("fit_scaler: empty training split");
    std::vector<State3> states;
    states.reserve(train.size() * (kWindowLength + 1));
    for (const WindowPair& p : train) {
        for (const State3& s : p.window) states.push_back(s);
        states.push_back(p.target);
    }
    return fit_scaler(std::span<const State3>(states));
}

inline State3 transform(const Scaler& sc, const State3& s) {
    return {(s.x - sc.mean[0]) / sc.std[0], (s.y - sc.mean[1]) / sc.std[1],
            (s.z - sc.mean[2]) / sc.std[2]};
}

inline State3 inverse_transform(const Scaler& sc, const State3& s) {
    return {s.x * sc.std[0] + sc.mean[0], s.y * sc.std[1] + sc.mean[1],
            s.z * sc.std[2] + sc.mean[2]};
}

inline WindowPair transform(const Scaler& sc, const WindowPair& p) {
    WindowPair out;
    for (int j = 0; j < kWindowLength; ++j) out.window[j] = transform(sc, p.window[j]);
    out.target = transform(sc, p.target);
    return out;
}

/// Standardized chronological splits plus the scaler that produced them.
struct SplitDataset {
    std::vector<WindowPair> train, val, test;
    Scaler scaler;

    std::size_t n_train() const { return train.size(); }
    std::size_t n_val() const { return val.size(); }
    std::size_t n_test() const { return test.size(); }
};

/// Full pipeline: windows -> chronological split -> scaler fitted on the
/// training block only -> all splits standardized with that scaler.
inline SplitDataset prepare_dataset(const Trajectory& traj,
                                    std::array<double, 3> fractions = {0.4, 0.5, 0.1}) {
    const std::vector<WindowPair> pairs = build_windows(traj);
    Splits raw = split_chronological(pairs, fractions);

    SplitDataset ds;
    ds.scaler = fit_scaler(std::span<const WindowPair>(raw.train));
    auto standardize = [&ds](const std::vector<WindowPair>& in) {
        std::vector<WindowPair> out;
        out.reserve(in.size());
        for (const WindowPair& p : in) out.push_back(transform(ds.scaler, p));
        return out;
    };
    ds.train = standardize(raw.train);
    ds.val = standardize(raw.val);
    ds.test = standardize(raw.test);
    return ds;
}

/// Fixture export: one row per pair, 21 window reals + 3 target reals.
inline void write_pairs_csv(std::span<const WindowPair> pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_pairs_csv: cannot open " + path);
    for (int j = 0; j < kWindowLength; ++j)
        out << "w" << j << "_x,w" << j << "_y,w" << j << "_z,";
    out << "target_x,target_y,target_z\n";
    for (const WindowPair& p : pairs) {
        for (const State3& s : p.window)
            out << format_double(s.x) << ',' << format_double(s.y) << ','
                << format_double(s.z) << ',';
        out << format_double(p.target.x) << ',' << format_double(p.target.y) << ','
            << format_double(p.target.z) << '\n';
    }
    if (!out) throw Error("write_pairs_csv: write failed for " + path);
}

inline std::vector<WindowPair> read_pairs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_pairs_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("read_pairs_csv: empty file " + path);

    std::vector<WindowPair> pairs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::array<double, 3 * (kWindowLength + 1)> vals{};
        char comma;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!(row >> vals[i])) throw DataError("read_pairs_csv: malformed row '" + line + "'");
            if (i + 1 < vals.size() && !(row >> comma))
                throw DataError("read_pairs_csv: malformed row '" + line + "'");
        }
        WindowPair p;
        for (int j = 0; j < kWindowLength; ++j)
            p.window[j] = {vals[3 * j], vals[3 * j + 1], vals[3 * j + 2]};
        p.target = {vals[21], vals[22], vals[23]};
        pairs.push_back(p);
    }
    return pairs;
}

}  // namespace tnm
