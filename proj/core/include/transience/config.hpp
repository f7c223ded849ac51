#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "transience/evaluate.hpp"
#include "transience/losses.hpp"
#include "transience/train.hpp"

namespace transience {

/// Everything a run needs, with documented defaults. Loaded from a plain
/// key=value file and overridable from the command line; unknown keys are
/// rejected so typos fail loudly.
struct RunConfig {
    // method
    std::string variant = "contrastive";  // contrastive | cca | mmi | ctw | uniform
    double margin = 0.5;
    double lambda = 1.0;
    double kappa = 1.0;
    double cca_reg = 1e-4;
    std::string mmi_mode = "sample_mean";  // sample_mean | literal
    bool use_autoencoder = false;
    bool use_private = false;
    double sigma_noise = 0.5;
    double kde_sigma_init = 1.0;

    // networks and optimizer
    std::vector<int> hidden{200, 100, 100};
    double leak = 0.03;
    int d_z = 20;
    int d_z_tilde = 10;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // alternation
    int batch_size = 512;
    int epochs_per_phase = 10;
    int max_outer_iters = 20;
    double convergence_threshold = 0.01;
    std::string dtw_metric = "cosine";  // cosine | euclidean
    double ctw_reg = 1e-4;

    // synthetic benchmark
    int d_x = 12;
    int d_y = 25;
    int latent_dim = 6;
    int t_x = 200;
    int t_y = 240;
    double noise_std = 0.1;
    double warp_jitter = 0.5;
    double smoothness = 10.0;
    int n_train_pairs = 3;
    int n_test_pairs = 2;

    // feature pipeline
    bool deltas = true;
    int context_width = 1;
    int pca_retained = 30;

    // downstream regressor
    std::vector<int> ds_hidden{64, 64};
    double ds_lr = 1e-3;
    int ds_epochs = 30;
    int ds_batch_size = 128;

    // run control
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string data_dir = "data";
    std::string variants = "contrastive,cca,mmi,ctw";  // for `eval`
    int n_seeds = 5;                                   // seeds seed..seed+n-1 for `eval`
};

/// Parses a key=value file ('#' comments and blank lines allowed).
RunConfig load_config(const std::filesystem::path& file, RunConfig base = {});

/// Applies one "key=value" override; unknown keys throw naming the key.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Cross-field validation; messages name the offending key.
void validate(const RunConfig& cfg);

/// One line per key: name, default, description (shown by --help).
std::string config_help();

/// Serialization of every key (used to persist effective configs).
std::string serialize(const RunConfig& cfg);

LossConfig to_loss_config(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);
SynthSpec to_synth_spec(const RunConfig& cfg);
PreprocessConfig to_preprocess_config(const RunConfig& cfg);
DownstreamConfig to_downstream_config(const RunConfig& cfg);
BenchmarkSpec to_benchmark_spec(const RunConfig& cfg);

std::vector<int> parse_int_list(const std::string& csv);
std::vector<Variant> parse_variants(const std::string& csv);

}  // namespace transience
