#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "support.hpp"
#include "tnm/dataset.hpp"

using namespace tnm;

namespace {

Trajectory ramp_trajectory(int n) {
    Trajectory traj;
    traj.dt_sample = 0.1;
    for (int i = 0; i < n; ++i) {
        const double v = static_cast<double>(i);
        traj.states.push_back({v, 2.0 * v, -v});
    }
    return traj;
}

}  // namespace

TEST_CASE("build_windows on the minimal trajectory") {
    const auto pairs = build_windows(ramp_trajectory(8));
    REQUIRE(pairs.size() == 1);
    REQUIRE(pairs[0].window[0].x == 0.0);
    REQUIRE(pairs[0].window[6].x == 6.0);
    REQUIRE(pairs[0].target.x == 7.0);
}

TEST_CASE("build_windows count and overlap") {
    const auto pairs = build_windows(ramp_trajectory(3000));
    REQUIRE(pairs.size() == 2993);
    for (std::size_t k = 0; k + 1 < 100; ++k)
        for (int j = 0; j < 6; ++j)
            REQUIRE(pairs[k].window[j + 1] == pairs[k + 1].window[j]);
}

TEST_CASE("build_windows preserves order and reconstructs the trajectory") {
    const Trajectory traj = ramp_trajectory(40);
    const auto pairs = build_windows(traj);
    // States 0..6 from the first window, the rest from successive targets.
    std::vector<State3> rebuilt(pairs[0].window.begin(), pairs[0].window.end());
    for (const WindowPair& p : pairs) rebuilt.push_back(p.target);
    REQUIRE(rebuilt == traj.states);
}

TEST_CASE("build_windows rejects short trajectories") {
    REQUIRE_THROWS_AS(build_windows(ramp_trajectory(7)), DataError);
}

TEST_CASE("split_chronological floor arithmetic") {
    {
        const auto pairs = build_windows(ramp_trajectory(17));  // P = 10
        const Splits s = split_chronological(pairs);
        REQUIRE(s.train.size() == 4);
        REQUIRE(s.val.size() == 5);
        REQUIRE(s.test.size() == 1);
    }
    {
        const auto pairs = build_windows(ramp_trajectory(3000));  // P = 2993
        const Splits s = split_chronological(pairs);
        REQUIRE(s.train.size() == 1197);
        REQUIRE(s.val.size() == 1496);
        REQUIRE(s.test.size() == 300);

        std::vector<WindowPair> rejoined = s.train;
        rejoined.insert(rejoined.end(), s.val.begin(), s.val.end());
        rejoined.insert(rejoined.end(), s.test.begin(), s.test.end());
        REQUIRE(rejoined == pairs);
    }
}

TEST_CASE("split_chronological validates fractions and emptiness") {
    const auto pairs = build_windows(ramp_trajectory(17));
    REQUIRE_THROWS_AS(split_chronological(pairs, {0.5, 0.5, 0.1}), ConfigError);
    REQUIRE_THROWS_AS(split_chronological(pairs, {-0.1, 1.0, 0.1}), ConfigError);
    const auto two = build_windows(ramp_trajectory(9));  // P = 2
    REQUIRE_THROWS_AS(split_chronological(two), ConfigError);
}

TEST_CASE("fit_scaler examples") {
    {
        const std::vector<State3> states{{0, 0, 0}, {2, 2, 2}};
        const Scaler sc = fit_scaler(std::span<const State3>(states));
        for (int i = 0; i < 3; ++i) {
            REQUIRE(sc.mean[i] == 1.0);
            REQUIRE(sc.std[i] == 1.0);
        }
    }
    {
        const std::vector<State3> states{{3, -1, 2}, {3, -1, 2}, {3, -1, 2}};
        const Scaler sc = fit_scaler(std::span<const State3>(states));
        REQUIRE(sc.mean[0] == 3.0);
        REQUIRE(sc.mean[1] == -1.0);
        REQUIRE(sc.mean[2] == 2.0);
        for (int i = 0; i < 3; ++i) REQUIRE(sc.std[i] == kStdClamp);
    }
}

TEST_CASE("scaler is fitted from the training block only") {
    Trajectory a = ramp_trajectory(100);
    Trajectory b = a;
    // P = 93 pairs, n_train = 37; training pairs touch states 0..43 only.
    for (std::size_t i = 60; i < b.states.size(); ++i) b.states[i].x += 1000.0;

    const SplitDataset da = prepare_dataset(a);
    const SplitDataset db = prepare_dataset(b);
    REQUIRE(da.scaler == db.scaler);
}

TEST_CASE("transform examples and round trip") {
    Scaler sc;
    sc.mean = {1.0, 1.0, 1.0};
    sc.std = {1.0, 1.0, 1.0};
    const State3 t = transform(sc, State3{2.0, 3.0, 4.0});
    REQUIRE(t == State3{1.0, 2.0, 3.0});
    REQUIRE(transform(sc, State3{1.0, 1.0, 1.0}) == State3{0.0, 0.0, 0.0});

    std::mt19937_64 rng(17);
    Scaler rsc;
    rsc.mean = {1.7, -0.3, 12.0};
    rsc.std = {2.5, 0.04, 7.0};
    for (int rep = 0; rep < 50; ++rep) {
        const auto v = testsupport::random_values(rng, 3, -50.0, 50.0);
        const State3 s{v[0], v[1], v[2]};
        const State3 round = inverse_transform(rsc, transform(rsc, s));
        REQUIRE_THAT(round.x, Catch::Matchers::WithinAbs(s.x, 1e-12));
        REQUIRE_THAT(round.y, Catch::Matchers::WithinAbs(s.y, 1e-12));
        REQUIRE_THAT(round.z, Catch::Matchers::WithinAbs(s.z, 1e-12));
    }
}

TEST_CASE("standardized training block has zero mean and unit variance") {
    Trajectory traj;
    traj.dt_sample = 0.1;
    std::mt19937_64 rng(23);
    for (int i = 0; i < 400; ++i) {
        const auto v = testsupport::random_values(rng, 3, -8.0, 8.0);
        traj.states.push_back({10.0 + v[0], -4.0 + 3.0 * v[1], 25.0 + 0.5 * v[2]});
    }
    const SplitDataset ds = prepare_dataset(traj);

    std::array<double, 3> sum{}, sumsq{};
    std::size_t count = 0;
    auto tally = [&](const State3& s) {
        const std::array<double, 3> v{s.x, s.y, s.z};
        for (int i = 0; i < 3; ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
        }
        ++count;
    };
    for (const WindowPair& p : ds.train) {
        for (const State3& s : p.window) tally(s);
        tally(p.target);
    }
    for (int i = 0; i < 3; ++i) {
        const double mean = sum[i] / count;
        const double var = sumsq[i] / count - mean * mean;
        REQUIRE_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-9));
        REQUIRE_THAT(std::sqrt(var), Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("pairs CSV round trip is exact") {
    Trajectory traj;
    traj.dt_sample = 0.1;
    std::mt19937_64 rng(29);
    for (int i = 0; i < 20; ++i) {
        const auto v = testsupport::random_values(rng, 3, -30.0, 30.0);
        traj.states.push_back({v[0], v[1], v[2]});
    }
    const auto pairs = build_windows(traj);
    const auto path = std::filesystem::temp_directory_path() / "tnm_pairs_roundtrip.csv";
    write_pairs_csv(pairs, path.string());
    const auto back = read_pairs_csv(path.string());
    std::filesystem::remove(path);
    REQUIRE(back == pairs);
}
