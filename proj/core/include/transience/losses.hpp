#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "transience/mlp.hpp"
#include "transience/rng.hpp"

namespace transience {

enum class Dependence { cca, mmi, contrastive };
enum class MmiMode { literal, sample_mean };

std::string to_string(Dependence d);
Dependence dependence_from_string(const std::string& s);
std::string to_string(MmiMode m);
MmiMode mmi_mode_from_string(const std::string& s);

struct LossConfig {
    Dependence dependence = Dependence::contrastive;
    double margin = 0.5;           // contrastive margin m
    double lambda = 1.0;           // reconstruction weight
    double kappa = 1.0;            // KL weight
    double cca_regularizer = 1e-4; // added to batch covariance diagonals
    MmiMode mmi_mode = MmiMode::sample_mean;
    bool use_autoencoder = false;
    bool use_private = false;
    double sigma_noise = 0.5;      // denoising corruption on reconstruction inputs
};

void validate(const LossConfig& cfg);

/// KDE bandwidths for the joint and the two marginal densities, kept in
/// log-domain so gradient steps preserve positivity. Sigmas below 1e-6 are
/// clamped on read.
struct KdeBandwidths {
    Eigen::Vector3d log_sigma = Eigen::Vector3d::Zero();  // joint, x, y

    static KdeBandwidths from_log(const Eigen::Vector3d& log_sigma);
    double sigma_joint() const;
    double sigma_x() const;
    double sigma_y() const;
    bool clamped() const;
};

struct CcaResult {
    double value = 0.0;
    Eigen::MatrixXd grad_zx, grad_zy;
};

/// sqrt(tr(T^T T)) with T = Sxx^{-1/2} Sxy Syy^{-1/2} and regularized batch
/// covariances. Gradients are exact derivatives of the regularized value.
/// The trainer maximizes this quantity. Requires N > d_z.
CcaResult cca_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy, double reg);

struct MmiResult {
    double value = 0.0;
    Eigen::MatrixXd grad_zx, grad_zy;
    Eigen::Vector3d grad_log_sigma = Eigen::Vector3d::Zero();
    bool bandwidth_clamped = false;
};

/// KDE mutual-information estimate over leave-one-out Gaussian-kernel
/// densities. `literal` weights each log-ratio by the joint density value;
/// `sample_mean` averages the log-ratios. Requires N >= 3.
MmiResult mmi_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                   const KdeBandwidths& bw, MmiMode mode);

/// Leave-one-out density at an arbitrary query point, with the same kernel
/// constants mmi_loss uses. Exposed for diagnostics and quadrature checks.
double kde_loo_density(const Eigen::VectorXd& query, const Eigen::MatrixXd& samples,
                       int exclude, double sigma);

struct ContrastiveResult {
    double value = 0.0;
    Eigen::MatrixXd grad_zx, grad_zy;
    bool zero_norm_guard_hit = false;
};

/// Margin hinge over cosine distances between aligned positives and shuffled
/// negatives. `negatives` must be a derangement (0-based, no fixed points).
/// Subgradient 0 at the hinge kink; this loss is minimized.
ContrastiveResult contrastive_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                                   const std::vector<int>& negatives, double margin);

/// Circular shift by a uniform offset in [1, N-1]: a derangement.
std::vector<int> circular_derangement(int n, Rng& rng);

struct ReconstructionResult {
    double value = 0.0;
    Eigen::MatrixXd grad_xhat, grad_yhat;
};

/// (lambda/N) * (sum ||x_i - xhat_i||^2 + sum ||y_i - yhat_i||^2).
ReconstructionResult reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                         const Eigen::MatrixXd& xhat, const Eigen::MatrixXd& yhat,
                                         double lambda);

struct KlResult {
    double value = 0.0;
    Eigen::MatrixXd grad;
};

/// KL divergence from batch moments (biased variance, floored at 1e-8) to the
/// standard normal: 1/2 sum_i (var_i + mean_i^2 - 1 - log var_i).
KlResult kl_loss(const Eigen::MatrixXd& zpriv);

struct StackGrads {
    MlpGrads encoder_x, encoder_y;
    MlpGrads private_x, private_y;
    MlpGrads decoder_x, decoder_y;
    Eigen::Vector3d log_kde_sigma = Eigen::Vector3d::Zero();
};

struct ObjectiveResult {
    double value = 0.0;       // minimized: dep_term + lambda*recon + kappa*KL
    double dep_term = 0.0;    // -L_cca, -L_mmi, or +L_contrastive
    double recon_term = 0.0;
    double kl_term = 0.0;
    StackGrads grads;
};

/// Assembles the training objective on one aligned minibatch and backpropagates
/// into every network of the stack. Consumes rng in a fixed order: contrastive
/// derangement first, then reconstruction-pathway noise for x and y.
ObjectiveResult total_objective(const EncoderStack& stack, const Eigen::MatrixXd& xb,
                                const Eigen::MatrixXd& yb, const LossConfig& cfg, Rng& rng);

}  // namespace transience
