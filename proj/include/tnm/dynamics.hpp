#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tnm/common.hpp"

namespace tnm {

/// Point in phase space.
struct State3 {
    double x = 0.0, y = 0.0, z = 0.0;

    friend State3 operator+(const State3& l, const State3& r) {
        return {l.x + r.x, l.y + r.y, l.z + r.z};
    }
    friend State3 operator*(double s, const State3& v) {
        return {s * v.x, s * v.y, s * v.z};
    }
    bool operator==(const State3&) const = default;
};

inline bool is_finite(const State3& s) {
    return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.z);
}

enum class FlowKind { Lorenz, Rossler };

struct LorenzParams {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 8.0 / 3.0;
};

struct RosslerParams {
    double a = 0.2;
    double b = 0.2;
    double c = 5.7;
};

/// Which flow to integrate and how to sample it. Parameters of the
/// inactive kind are carried but ignored.
struct FlowSpec {
    FlowKind kind = FlowKind::Lorenz;
    LorenzParams lorenz;
    RosslerParams rossler;
    double h = 0.01;          // integrator step
    int sample_every = 10;    // record every k-th step
    int n_samples = 3000;
    State3 x0{1.0, 1.0, 1.0};
    long transient_steps = 1000;  // discarded before sampling
};

/// Any coordinate beyond this magnitude counts as a blow-up.
inline constexpr double kBlowUpGuard = 1e6;

inline State3 lorenz_rhs(const State3& s, double sigma, double rho, double beta) {
    return {sigma * (s.y - s.x), s.x * (rho - s.z) - s.y, s.x * s.y - beta * s.z};
}

inline State3 rossler_rhs(const State3& s, double a, double b, double c) {
    return {-s.y - s.z, s.x + a * s.y, b + s.z * (s.x - c)};
}

inline State3 flow_rhs(const FlowSpec& flow, const State3& s) {
    switch (flow.kind) {
        case FlowKind::Lorenz:
            return lorenz_rhs(s, flow.lorenz.sigma, flow.lorenz.rho, flow.lorenz.beta);
        case FlowKind::Rossler:
            return rossler_rhs(s, flow.rossler.a, flow.rossler.b, flow.rossler.c);
    }
    throw Error("flow_rhs: unknown flow kind");
}

/// One classical fourth-order Runge-Kutta update of an arbitrary state
/// type. State needs operator+ and scalar operator*; Rhs maps state to
/// its time derivative.
template <typename State, typename Rhs>
State rk4_update(const State& s, double h, Rhs&& rhs) {
    const State k1 = rhs(s);
    const State k2 = rhs(s + (0.5 * h) * k1);
    const State k3 = rhs(s + (0.5 * h) * k2);
    const State k4 = rhs(s + h * k3);
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One RK4 step of the selected flow. Throws IntegrationError on blow-up.
inline State3 rk4_step(const FlowSpec& flow, const State3& s) {
    if (flow.h <= 0.0) throw ConfigError("rk4_step: step size must be positive");
    const State3 next =
        rk4_update(s, flow.h, [&flow](const State3& v) { return flow_rhs(flow, v); });
    if (!is_finite(next) || std::fabs(next.x) > kBlowUpGuard ||
        std::fabs(next.y) > kBlowUpGuard || std::fabs(next.z) > kBlowUpGuard) {
        throw IntegrationError("rk4_step: trajectory blow-up");
    }
    return next;
}

/// Uniformly sampled trajectory; dt_sample = h * sample_every.
struct Trajectory {
    double dt_sample = 0.0;
    std::vector<State3> states;
};

/// Runs the transient (discarded), then records every sample_every-th
/// state until n_samples states are collected. The first recorded state
/// is the post-transient state itself.
inline Trajectory generate_trajectory(const FlowSpec& flow) {
    if (flow.h <= 0.0) throw ConfigError("generate_trajectory: h must be positive");
    if (flow.sample_every < 1)
        throw ConfigError("generate_trajectory: sample_every must be >= 1");
    if (flow.n_samples < 1)
        throw ConfigError("generate_trajectory: n_samples must be >= 1");
    if (flow.transient_steps < 0)
        throw ConfigError("generate_trajectory: transient_steps must be >= 0");
    if (!is_finite(flow.x0))
        throw ConfigError("generate_trajectory: initial state must be finite");

    Trajectory traj;
    traj.dt_sample = flow.h * flow.sample_every;
    traj.states.reserve(flow.n_samples);

    State3 s = flow.x0;
    long step = 0;
    auto advance = [&](long n_steps) {
        for (long i = 0; i < n_steps; ++i) {
            try {
                s = rk4_step(flow, s);
            } catch (const IntegrationError&) {
                throw IntegrationError("generate_trajectory: trajectory blow-up", step + 1);
            }
            ++step;
        }
    };

    advance(flow.transient_steps);
    traj.states.push_back(s);
    while (static_cast<int>(traj.states.size()) < flow.n_samples) {
        advance(flow.sample_every);
        traj.states.push_back(s);
    }
    return traj;
}

/// Writes `t,x,y,z` rows, t = index * dt_sample, doubles round-trip exact.
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_trajectory_csv: cannot open " + path);
    out << "t,x,y,z\n";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const State3& s = traj.states[i];
        out << format_double(static_cast<double>(i) * traj.dt_sample) << ','
            << format_double(s.x) << ',' << format_double(s.y) << ','
            << format_double(s.z) << '\n';
    }
    if (!out) throw Error("write_trajectory_csv: write failed for " + path);
}

inline Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_trajectory_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,x,y,z")
        throw DataError("read_trajectory_csv: expected header 't,x,y,z' in " + path);

    std::vector<double> ts;
    Trajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        double vals[4];
        char comma;
        if (!(row >> vals[0] >> comma >> vals[1] >> comma >> vals[2] >> comma >> vals[3]))
            throw DataError("read_trajectory_csv: malformed row '" + line + "'");
        ts.push_back(vals[0]);
        traj.states.push_back({vals[1], vals[2], vals[3]});
    }
    if (traj.states.size() < 2)
        throw DataError("read_trajectory_csv: need at least 2 samples to recover dt");
    traj.dt_sample = ts[1] - ts[0];
    return traj;
}

}  // namespace tnm
