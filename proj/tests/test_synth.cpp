#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "transience/dtw.hpp"
#include "transience/losses.hpp"
#include "transience/synth.hpp"

using namespace transience;

TEST_CASE("gen_latent is deterministic and z-scored per dimension") {
    Rng a = substream(500, "latent");
    Rng b = substream(500, "latent");
    Eigen::MatrixXd la = gen_latent(120, 3, 8.0, a);
    Eigen::MatrixXd lb = gen_latent(120, 3, 8.0, b);
    CHECK(la == lb);
    for (int d = 0; d < 3; ++d) {
        const double mean = la.row(d).mean();
        const double sd = std::sqrt((la.row(d).array() - mean).square().sum() / 119.0);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gen_latent with smoothness ~ T has tiny per-frame increments") {
    Rng rng = substream(501, "latent-smooth");
    const int t = 200;
    Eigen::MatrixXd latent = gen_latent(t, 2, static_cast<double>(t), rng);
    double max_inc = 0.0;
    for (int i = 1; i < t; ++i) {
        max_inc = std::max(max_inc, (latent.col(i) - latent.col(i - 1)).cwiseAbs().maxCoeff());
    }
    CHECK(max_inc < 0.05);
}

TEST_CASE("gen_warp with zero jitter reproduces the uniform ceiling map") {
    Rng rng = substream(502, "warp0");
    std::vector<int> map = gen_warp(5, 8, 0.0, rng);
    for (int s = 0; s < 8; ++s) {
        const long long num = static_cast<long long>(s) * 4;
        const int expected = 1 + static_cast<int>((num + 6) / 7);  // 1 + ceil(s*4/7)
        CHECK(map[s] == expected);
    }
    // and matches uniform_init_path's y->x correspondence when t_y >= t_x
    WarpingPathPair uniform = uniform_init_path(5, 8);
    for (int t = 0; t < uniform.length(); ++t) {
        CHECK(map[uniform.phi_y[t] - 1] == uniform.phi_x[t]);
    }
}

TEST_CASE("gen_warp satisfies monotonicity and endpoint invariants") {
    Rng rng = substream(503, "warp-inv");
    for (int trial = 0; trial < 1000; ++trial) {
        const int tx = 2 + static_cast<int>(uniform_int(rng, 0, 58));
        const int ty = 2 + static_cast<int>(uniform_int(rng, 0, 58));
        std::vector<int> map = gen_warp(tx, ty, 0.5, rng);
        CHECK(map.front() == 1);
        CHECK(map.back() == tx);
        for (std::size_t s = 1; s < map.size(); ++s) CHECK(map[s] >= map[s - 1]);
    }
}

TEST_CASE("gen_warp with jitter 0.5 deviates from the uniform map almost surely") {
    Rng rng = substream(504, "warp-dev");
    int deviated = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<int> map = gen_warp(50, 60, 0.5, rng);
        Rng zero_rng = substream(0, "unused");
        std::vector<int> uniform = gen_warp(50, 60, 0.0, zero_rng);
        for (int s = 0; s < 60; ++s) {
            if (map[s] != uniform[s]) {
                ++deviated;
                break;
            }
        }
    }
    CHECK(deviated >= 990);
}

TEST_CASE("gen_pair symmetric degeneracy: equal maps, no noise, no jitter") {
    SynthSpec spec;
    spec.d_x = 4;
    spec.d_y = 4;
    spec.latent_dim = 3;
    spec.t_x = 50;
    spec.t_y = 50;
    spec.noise_std = 0.0;
    spec.warp_jitter = 0.0;
    SynthMaps maps;
    Rng rng = substream(505, "maps");
    maps.a_x.resize(4, 3);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 3; ++c) maps.a_x(r, c) = gaussian(rng);
    maps.a_y = maps.a_x;
    maps.b_x = Eigen::VectorXd::Zero(4);
    maps.b_y = maps.b_x;
    SynthPair pair = gen_pair(spec, 7, &maps);
    CHECK(pair.x.data.isApprox(pair.y.data, 1e-12));
    // raw-feature DTW then recovers the identity alignment exactly
    Eigen::MatrixXd cost = pairwise_distance(pair.x.data, pair.y.data, DtwMetric::euclidean);
    DtwResult r = dtw(cost);
    for (int t = 0; t < r.path.length(); ++t) CHECK(r.path.phi_x[t] == r.path.phi_y[t]);
}

TEST_CASE("gen_pair is bit-identical for a fixed seed") {
    SynthSpec spec;
    spec.t_x = 40;
    spec.t_y = 48;
    SynthPair a = gen_pair(spec, 123);
    SynthPair b = gen_pair(spec, 123);
    CHECK(a.x.data == b.x.data);
    CHECK(a.y.data == b.y.data);
    CHECK(a.true_map == b.true_map);
    SynthPair c = gen_pair(spec, 124);
    CHECK(a.x.data != c.x.data);
}

TEST_CASE("gen_pair true_map satisfies the SynthPair invariants") {
    SynthSpec spec;
    spec.t_x = 60;
    spec.t_y = 75;
    SynthPair pair = gen_pair(spec, 42);
    CHECK(pair.true_map.size() == 75);
    CHECK(pair.true_map.front() == 1);
    CHECK(pair.true_map.back() == 60);
    for (std::size_t s = 1; s < pair.true_map.size(); ++s) {
        CHECK(pair.true_map[s] >= pair.true_map[s - 1]);
    }
}

TEST_CASE("gen_pair rejects latent dims above the view dims") {
    SynthSpec spec;
    spec.d_x = 3;
    spec.d_y = 5;
    spec.latent_dim = 4;
    CHECK_THROWS_AS(gen_pair(spec, 1), std::invalid_argument);
}

TEST_CASE("aligned frames carry mutual information; shuffling destroys it") {
    SynthSpec spec;
    spec.d_x = 2;
    spec.d_y = 2;
    spec.latent_dim = 2;
    spec.t_x = 200;
    spec.t_y = 200;
    spec.warp_jitter = 0.0;
    spec.noise_std = 0.05;
    SynthPair pair = gen_pair(spec, 11);
    // truth-aligned frame pairs (identity map here)
    Eigen::MatrixXd x = pair.x.data;
    Eigen::MatrixXd y = pair.y.data;
    Eigen::MatrixXd y_shuffled = y;
    for (int i = 0; i < 200; ++i) y_shuffled.col(i) = y.col((i + 97) % 200);
    KdeBandwidths bw;
    const double aligned = mmi_loss(x, y, bw, MmiMode::sample_mean).value;
    const double shuffled = mmi_loss(x, y_shuffled, bw, MmiMode::sample_mean).value;
    CHECK(aligned > 0.0);
    CHECK(aligned > shuffled);
}

TEST_CASE("write_synth_pair emits sequence files and a 0-based truth csv") {
    SynthSpec spec;
    spec.t_x = 20;
    spec.t_y = 24;
    SynthPair pair = gen_pair(spec, 5);
    auto dir = std::filesystem::temp_directory_path() / "transience_synth_test";
    write_synth_pair(dir, "pair", pair);
    FeatureSequence x = read_sequence(dir / "pair_x.seq");
    CHECK(x.data == pair.x.data);
    std::vector<int> truth = read_truth_csv(dir / "pair_truth.csv");
    CHECK(truth == pair.true_map);
}
