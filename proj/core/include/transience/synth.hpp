#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "transience/rng.hpp"
#include "transience/sequence.hpp"

namespace transience {

/// Generation recipe for one two-view pair: a shared smooth latent trajectory,
/// two random tanh observation maps, independent noise, and a monotone warp.
struct SynthSpec {
    int d_x = 12;
    int d_y = 25;
    int latent_dim = 6;
    int t_x = 200;
    int t_y = 240;
    double noise_std = 0.1;
    double warp_jitter = 0.5;     // in [0, 1)
    double smoothness = 10.0;     // latent smoothing window std, frames
};

void validate(const SynthSpec& spec);

struct SynthPair {
    FeatureSequence x;
    FeatureSequence y;
    std::vector<int> true_map;  // per Y frame, the ground-truth X frame (1-based)
    std::uint64_t seed = 0;
};

/// Smooth latent trajectory: cumulative Gaussian walk convolved with a
/// Gaussian window of std `smoothness` frames, z-scored per dimension.
Eigen::MatrixXd gen_latent(int t, int k, double smoothness, Rng& rng);

/// Monotone warp: cumulative positive increments uniform in
/// [1-jitter, 1+jitter], rescaled to span [1, t_x] over t_y steps with
/// pinned endpoints. Jitter 0 reproduces the uniform (ceil) map.
std::vector<int> gen_warp(int t_x, int t_y, double jitter, Rng& rng);

/// The two tanh observation maps. Pairs belonging to one benchmark run share
/// a single draw (one "session": a fixed cross-view relationship), while
/// trajectories, warps and noise stay independent per pair.
struct SynthMaps {
    Eigen::MatrixXd a_x, a_y;
    Eigen::VectorXd b_x, b_y;
};

SynthMaps draw_maps(const SynthSpec& spec, Rng& rng);

SynthPair gen_pair(const SynthSpec& spec, std::uint64_t seed,
                   const SynthMaps* maps = nullptr);

/// Writes <name>_x.seq, <name>_y.seq and <name>_truth.csv
/// (columns y_index,x_index, 0-based).
void write_synth_pair(const std::filesystem::path& dir, const std::string& name,
                      const SynthPair& pair);

void write_truth_csv(const std::filesystem::path& file, const std::vector<int>& true_map);
std::vector<int> read_truth_csv(const std::filesystem::path& file);

}  // namespace transience
