#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "transience/dtw.hpp"
#include "transience/losses.hpp"
#include "transience/mlp.hpp"
#include "transience/sequence.hpp"

namespace transience {

struct TrainConfig {
    std::vector<int> hidden{200, 100, 100};
    double leak = 0.03;
    int d_z = 20;
    int d_z_tilde = 10;
    AdamConfig adam;                     // lr 1e-4, betas 0.9/0.999, eps 1e-8
    int batch_size = 512;
    int epochs_per_phase = 10;
    int max_outer_iterations = 20;
    double convergence_threshold = 0.01; // fraction of changed path cells
    DtwMetric metric = DtwMetric::cosine;
    double ctw_regularizer = 1e-4;       // covariance regularizer for the linear baseline
    double kde_sigma_init = 1.0;         // initial KDE bandwidths (mmi variant)
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct OuterIterRecord {
    int outer_iter = 0;
    double objective = 0.0;             // mean minibatch objective over phase 1
    double dtw_cost_total = 0.0;        // summed over pairs after phase 2
    double path_change_fraction = 0.0;
};

/// Closed-form linear CCA projections (the CTW baseline model).
struct LinearCcaModel {
    Eigen::MatrixXd proj_x, proj_y;     // d_z x d_view
    Eigen::VectorXd mean_x, mean_y;
    Eigen::VectorXd correlations;       // canonical correlations, descending
};

struct TrainRun {
    std::optional<EncoderStack> stack;   // transience variants
    std::optional<LinearCcaModel> linear;// ctw
    std::vector<WarpingPathPair> paths;  // final path per sequence pair
    std::vector<OuterIterRecord> history;
    double initial_objective = 0.0;      // evaluated before any training
    double initial_dtw_cost = 0.0;       // uniform paths under initial projections
};

using SequencePair = std::pair<FeatureSequence, FeatureSequence>;

/// Alternates encoder training on the currently-aligned frame pairs with DTW
/// over the frozen-encoder latents, starting from uniform paths, until the
/// fraction of changed path cells drops below the threshold or the iteration
/// cap is hit. Features must be preprocessed (normalized, deltas) upstream.
TrainRun transience_fit(const std::vector<SequencePair>& pairs,
                        const LossConfig& loss_cfg, const TrainConfig& cfg);

/// The linear baseline: closed-form CCA on aligned frames alternating with
/// DTW over the linear projections; same initialization, convergence rule and
/// bookkeeping as transience_fit.
TrainRun ctw_fit(const std::vector<SequencePair>& pairs, const TrainConfig& cfg);

/// Latent projections of one sequence pair under a trained run.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> project_pair(const TrainRun& run,
                                                         const FeatureSequence& x,
                                                         const FeatureSequence& y);

/// Fraction of path cells that changed between two paths of possibly
/// different lengths: 1 - |cells(a) & cells(b)| / max(|a|, |b|).
double path_change_fraction(const WarpingPathPair& a, const WarpingPathPair& b);

/// History CSV: outer_iter,objective,dtw_cost_total,path_change_fraction with
/// a row 0 recording the pre-training state.
void write_history_csv(const std::filesystem::path& file, const TrainRun& run);

void write_linear_model(const std::filesystem::path& file, const LinearCcaModel& model);
LinearCcaModel read_linear_model(const std::filesystem::path& file);

}  // namespace transience
