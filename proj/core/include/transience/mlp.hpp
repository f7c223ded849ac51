#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "transience/rng.hpp"

namespace transience {

struct MlpLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
};

/// Feed-forward net: affine + leaky-ReLU on hidden layers, affine output.
struct Mlp {
    std::vector<MlpLayer> layers;
    double leak = 0.03;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows()); }
};

/// Glorot-uniform init (+- sqrt(6/(fan_in+fan_out))), zero biases.
Mlp make_mlp(int in, const std::vector<int>& hidden, int out, double leak, Rng& rng);

/// Per-layer inputs and pre-activations captured by forward() for backward().
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;   // inputs[i] feeds layer i
    std::vector<Eigen::MatrixXd> preacts;  // preacts[i] = W_i inputs[i] + b_i
};

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& x, ForwardCache* cache = nullptr);

/// Parameter gradients, shaped exactly like Mlp::layers.
struct MlpGrads {
    std::vector<MlpLayer> layers;
};

MlpGrads zero_grads(const Mlp& net);

/// Reverse-mode gradients of the forward map. Accumulates parameter gradients
/// into `accum` and returns the gradient with respect to the input batch.
/// The cache must come from a forward() call on the same net and batch.
Eigen::MatrixXd backward(const Mlp& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_output, MlpGrads& accum);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<MlpLayer> m;  // first moments, shaped like the parameters
    std::vector<MlpLayer> v;  // second moments
    long step = 0;
};

AdamState make_adam_state(const Mlp& net, AdamConfig cfg = {});

/// Standard Adam update with bias correction. Nonfinite gradients reject the
/// whole update by throwing NumericalError; parameters stay untouched.
void adam_step(Mlp& net, const MlpGrads& grads, AdamState& state);

/// Adam for a flat parameter vector (used for KDE bandwidths).
struct AdamVecState {
    AdamConfig cfg;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long step = 0;
};

AdamVecState make_adam_state(const Eigen::VectorXd& params, AdamConfig cfg = {});
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamVecState& state);

/// X plus iid zero-mean Gaussian noise of std `sigma`; sigma = 0 returns X
/// unchanged. Used on reconstruction-pathway inputs during training only.
Eigen::MatrixXd inject_noise(const Eigen::MatrixXd& x, double sigma, Rng& rng);

/// The encoder/decoder family for one aligned view pair. Private encoders and
/// decoders are only populated when the corresponding flag is set; decoders
/// take d_z (+ d_z_tilde when private variables are enabled) inputs.
struct EncoderStack {
    Mlp encoder_x, encoder_y;
    Mlp private_x, private_y;
    Mlp decoder_x, decoder_y;
    bool use_autoencoder = false;
    bool use_private = false;
    int d_z = 0;
    int d_z_tilde = 0;
    Eigen::Vector3d log_kde_sigma = Eigen::Vector3d::Zero();  // joint, x, y (trainable for mmi)
};

struct StackSpec {
    int d_x = 0, d_y = 0;
    int d_z = 20, d_z_tilde = 10;
    std::vector<int> hidden{200, 100, 100};
    double leak = 0.03;
    bool use_autoencoder = false;
    bool use_private = false;
};

EncoderStack make_encoder_stack(const StackSpec& spec, Rng& rng);

// --- checkpoint format: text topology header, then raw little-endian f64
// tensors (weights row-major, then bias, per layer, per net) ---

void write_checkpoint(const std::filesystem::path& file, const EncoderStack& stack);
EncoderStack read_checkpoint(const std::filesystem::path& file);

// --- finite-difference gradient checking ---

struct ParamView {
    std::string name;
    double* data = nullptr;
    long size = 0;
};

std::vector<ParamView> param_views(Mlp& net, const std::string& prefix);
std::vector<ParamView> param_views(EncoderStack& stack, bool include_bandwidths);

/// Flattens gradients in the same order as the matching param_views call.
std::vector<Eigen::VectorXd> flatten(const MlpGrads& grads);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    long worst_coord = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares analytic gradients against central differences at
/// `coords_per_tensor` random coordinates per parameter tensor. Relative
/// error is |ga - gn| / max(|ga|, |gn|, denom_floor). Throws NumericalError
/// if the loss is nonfinite at any evaluation point.
///
/// The default floor (1e-8) suits losses whose sampled coordinates carry
/// nonvanishing gradients. Callers checking objectives with structurally
/// zero coordinates (translation-invariant losses zero out output biases)
/// should raise the floor to the central-difference noise level,
/// ~eps*|f|/(2*step*tolerance), since those coordinates cannot be resolved
/// beyond the noise of the value evaluations.
GradCheckResult gradcheck(const std::function<double()>& value_fn,
                          const std::function<std::vector<Eigen::VectorXd>()>& grad_fn,
                          const std::vector<ParamView>& params,
                          int coords_per_tensor, double step, Rng& rng,
                          double denom_floor = 1e-8);

}  // namespace transience
