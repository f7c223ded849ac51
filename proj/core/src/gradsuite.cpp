#include "transience/gradsuite.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "transience/losses.hpp"
#include "transience/mlp.hpp"
#include "transience/rng.hpp"

namespace transience {

namespace {

constexpr int kBatch = 32;
constexpr int kDz = 4;
constexpr int kDzTilde = 3;
constexpr int kDx = 6;
constexpr int kDy = 7;
constexpr double kStep = 1e-5;
constexpr int kCoords = 20;

// Central differences are invalid where the +-h evaluations straddle a
// leaky-ReLU or hinge kink, so evaluation points that close to a kink are
// rejected and redrawn (deterministically) instead of checked.
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxAttempts = 32;

double min_abs_hidden_preact(const Mlp& net, const Eigen::MatrixXd& input) {
    ForwardCache cache;
    forward(net, input, &cache);
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < cache.preacts.size(); ++i) {
        min_abs = std::min(min_abs, cache.preacts[i].cwiseAbs().minCoeff());
    }
    return min_abs;
}

double min_hinge_margin(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                        const std::vector<int>& negatives, double margin) {
    auto cosd = [](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
        return 1.0 - u.dot(v) / std::max(u.norm() * v.norm(), 1e-12);
    };
    double min_abs = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < zx.cols(); ++i) {
        const double arg = margin + cosd(zx.col(i), zy.col(i)) -
                           cosd(zx.col(i), zy.col(negatives[static_cast<std::size_t>(i)]));
        min_abs = std::min(min_abs, std::abs(arg));
    }
    return min_abs;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = gaussian(rng);
    }
    return m;
}

using GradFn = std::function<std::vector<Eigen::VectorXd>()>;

// wraps grad_fn so the named entry's first coordinate is perturbed (test hook
// for the failure path of `gradcheck` consumers)
GradFn maybe_corrupt(GradFn inner, bool corrupt) {
    if (!corrupt) return inner;
    return [inner]() {
        std::vector<Eigen::VectorXd> grads = inner();
        if (!grads.empty()) grads[0].array() += 1e-2;
        return grads;
    };
}

std::vector<Eigen::VectorXd> flatten_stack_grads(const EncoderStack& stack,
                                                 const StackGrads& grads,
                                                 bool include_bandwidths) {
    std::vector<Eigen::VectorXd> flat = flatten(grads.encoder_x);
    auto append = [&flat](std::vector<Eigen::VectorXd> more) {
        flat.insert(flat.end(), more.begin(), more.end());
    };
    append(flatten(grads.encoder_y));
    if (stack.use_private) {
        append(flatten(grads.private_x));
        append(flatten(grads.private_y));
    }
    if (stack.use_autoencoder) {
        append(flatten(grads.decoder_x));
        append(flatten(grads.decoder_y));
    }
    if (include_bandwidths) {
        flat.push_back(grads.log_kde_sigma);
    }
    return flat;
}

struct Check {
    std::string name;
    std::function<double(std::uint64_t run_seed, bool corrupt)> run;  // returns max rel error
};

double check_latent_loss(
    std::uint64_t seed, bool corrupt, bool with_bandwidths,
    const std::function<double(const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                               const Eigen::Vector3d&)>& value,
    const std::function<std::vector<Eigen::VectorXd>(const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                                                     const Eigen::Vector3d&)>& grads) {
    Rng rng = substream(seed, "latent-data");
    Eigen::MatrixXd zx = random_matrix(kDz, kBatch, rng);
    Eigen::MatrixXd zy = random_matrix(kDz, kBatch, rng);
    Eigen::Vector3d log_sigma{0.1 * gaussian(rng), 0.1 * gaussian(rng), 0.1 * gaussian(rng)};

    std::vector<ParamView> params{{"zx", zx.data(), zx.size()}, {"zy", zy.data(), zy.size()}};
    if (with_bandwidths) params.push_back({"log_sigma", log_sigma.data(), 3});

    auto value_fn = [&]() { return value(zx, zy, log_sigma); };
    GradFn grad_fn = maybe_corrupt([&]() { return grads(zx, zy, log_sigma); }, corrupt);
    Rng coords = substream(seed, "coords");
    return gradcheck(value_fn, grad_fn, params, kCoords, kStep, coords).max_rel_error;
}

// true when every hidden preactivation along every pathway (and every hinge
// argument, for the contrastive loss) sits safely away from its kink
bool total_eval_point_ok(const EncoderStack& stack, const Eigen::MatrixXd& xb,
                         const Eigen::MatrixXd& yb, const LossConfig& cfg,
                         std::uint64_t seed) {
    Rng r = substream(seed, "objective-noise");
    std::vector<int> negatives;
    if (cfg.dependence == Dependence::contrastive) {
        negatives = circular_derangement(static_cast<int>(xb.cols()), r);
    }
    double min_abs = std::min(min_abs_hidden_preact(stack.encoder_x, xb),
                              min_abs_hidden_preact(stack.encoder_y, yb));
    if (cfg.dependence == Dependence::contrastive) {
        Eigen::MatrixXd zx = forward(stack.encoder_x, xb);
        Eigen::MatrixXd zy = forward(stack.encoder_y, yb);
        min_abs = std::min(min_abs, min_hinge_margin(zx, zy, negatives, cfg.margin));
    }
    if (stack.use_autoencoder) {
        Eigen::MatrixXd xn = inject_noise(xb, cfg.sigma_noise, r);
        Eigen::MatrixXd yn = inject_noise(yb, cfg.sigma_noise, r);
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.encoder_x, xn));
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.encoder_y, yn));
        Eigen::MatrixXd dec_in_x = forward(stack.encoder_x, xn);
        Eigen::MatrixXd dec_in_y = forward(stack.encoder_y, yn);
        if (stack.use_private) {
            min_abs = std::min(min_abs, min_abs_hidden_preact(stack.private_x, xn));
            min_abs = std::min(min_abs, min_abs_hidden_preact(stack.private_y, yn));
            Eigen::MatrixXd zpx = forward(stack.private_x, xn);
            Eigen::MatrixXd zpy = forward(stack.private_y, yn);
            Eigen::MatrixXd tmp_x(dec_in_x.rows() + zpx.rows(), dec_in_x.cols());
            tmp_x << dec_in_x, zpx;
            Eigen::MatrixXd tmp_y(dec_in_y.rows() + zpy.rows(), dec_in_y.cols());
            tmp_y << dec_in_y, zpy;
            dec_in_x = tmp_x;
            dec_in_y = tmp_y;
        }
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.decoder_x, dec_in_x));
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.decoder_y, dec_in_y));
    } else if (stack.use_private) {
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.private_x, xb));
        min_abs = std::min(min_abs, min_abs_hidden_preact(stack.private_y, yb));
    }
    return min_abs > kKinkMargin;
}

double check_total(std::uint64_t seed, bool corrupt, Dependence dep, MmiMode mode,
                   bool autoenc, bool priv) {
    LossConfig cfg;
    cfg.dependence = dep;
    cfg.mmi_mode = mode;
    cfg.use_autoencoder = autoenc;
    cfg.use_private = priv;
    cfg.sigma_noise = 0.5;

    StackSpec spec;
    spec.d_x = kDx;
    spec.d_y = kDy;
    spec.d_z = kDz;
    spec.d_z_tilde = kDzTilde;
    spec.hidden = {8, 6};
    spec.use_autoencoder = autoenc;
    spec.use_private = priv;

    EncoderStack stack;
    Eigen::MatrixXd xb, yb;
    std::uint64_t eval_seed = seed;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        eval_seed = seed + 7919ULL * static_cast<std::uint64_t>(attempt);
        Rng rng_init = substream(eval_seed, "stack-init");
        stack = make_encoder_stack(spec, rng_init);
        Rng rng_data = substream(eval_seed, "batch-data");
        xb = random_matrix(kDx, kBatch, rng_data);
        yb = random_matrix(kDy, kBatch, rng_data);
        if (total_eval_point_ok(stack, xb, yb, cfg, eval_seed)) break;
    }

    const bool with_bw = dep == Dependence::mmi;
    std::vector<ParamView> params = param_views(stack, with_bw);

    // a fresh rng per evaluation keeps the derangement and noise fixed, so the
    // objective is a deterministic function of the parameters
    auto value_fn = [&]() {
        Rng r = substream(eval_seed, "objective-noise");
        return total_objective(stack, xb, yb, cfg, r).value;
    };
    GradFn grad_fn = maybe_corrupt(
        [&]() {
            Rng r = substream(eval_seed, "objective-noise");
            ObjectiveResult res = total_objective(stack, xb, yb, cfg, r);
            return flatten_stack_grads(stack, res.grads, with_bw);
        },
        corrupt);
    Rng coords = substream(eval_seed, "coords");
    // translation-invariant dependence losses zero output-bias gradients
    // exactly; hold those coordinates to the finite-difference noise level
    const double noise_floor =
        32.0 * 2.2e-16 * std::max(1.0, std::abs(value_fn())) / (2.0 * kStep * 1e-4);
    return gradcheck(value_fn, grad_fn, params, kCoords, kStep, coords,
                     std::max(1e-8, noise_floor))
        .max_rel_error;
}

std::vector<Check> build_checks() {
    std::vector<Check> checks;

    checks.push_back({"cca", [](std::uint64_t seed, bool corrupt) {
        return check_latent_loss(
            seed, corrupt, false,
            [](const auto& zx, const auto& zy, const auto&) {
                return cca_loss(zx, zy, 1e-4).value;
            },
            [](const auto& zx, const auto& zy, const auto&) {
                CcaResult r = cca_loss(zx, zy, 1e-4);
                return std::vector<Eigen::VectorXd>{
                    Eigen::Map<const Eigen::VectorXd>(r.grad_zx.data(), r.grad_zx.size()),
                    Eigen::Map<const Eigen::VectorXd>(r.grad_zy.data(), r.grad_zy.size())};
            });
    }});

    for (MmiMode mode : {MmiMode::literal, MmiMode::sample_mean}) {
        checks.push_back({"mmi-" + to_string(mode), [mode](std::uint64_t seed, bool corrupt) {
            return check_latent_loss(
                seed, corrupt, true,
                [mode](const auto& zx, const auto& zy, const Eigen::Vector3d& ls) {
                    return mmi_loss(zx, zy, KdeBandwidths::from_log(ls), mode).value;
                },
                [mode](const auto& zx, const auto& zy, const Eigen::Vector3d& ls) {
                    MmiResult r = mmi_loss(zx, zy, KdeBandwidths::from_log(ls), mode);
                    return std::vector<Eigen::VectorXd>{
                        Eigen::Map<const Eigen::VectorXd>(r.grad_zx.data(), r.grad_zx.size()),
                        Eigen::Map<const Eigen::VectorXd>(r.grad_zy.data(), r.grad_zy.size()),
                        r.grad_log_sigma};
                });
        }});
    }

    checks.push_back({"contrastive", [](std::uint64_t seed, bool corrupt) {
        // redraw until no hinge argument sits on its kink
        std::uint64_t eval_seed = seed;
        std::vector<int> negatives;
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            eval_seed = seed + 7919ULL * static_cast<std::uint64_t>(attempt);
            Rng neg_rng = substream(eval_seed, "negatives");
            negatives = circular_derangement(kBatch, neg_rng);
            Rng rng = substream(eval_seed, "latent-data");
            Eigen::MatrixXd zx = random_matrix(kDz, kBatch, rng);
            Eigen::MatrixXd zy = random_matrix(kDz, kBatch, rng);
            if (min_hinge_margin(zx, zy, negatives, 0.5) > kKinkMargin) break;
        }
        return check_latent_loss(
            eval_seed, corrupt, false,
            [&negatives](const auto& zx, const auto& zy, const auto&) {
                return contrastive_loss(zx, zy, negatives, 0.5).value;
            },
            [&negatives](const auto& zx, const auto& zy, const auto&) {
                ContrastiveResult r = contrastive_loss(zx, zy, negatives, 0.5);
                return std::vector<Eigen::VectorXd>{
                    Eigen::Map<const Eigen::VectorXd>(r.grad_zx.data(), r.grad_zx.size()),
                    Eigen::Map<const Eigen::VectorXd>(r.grad_zy.data(), r.grad_zy.size())};
            });
    }});

    checks.push_back({"reconstruction", [](std::uint64_t seed, bool corrupt) {
        Rng rng = substream(seed, "recon-data");
        Eigen::MatrixXd x = random_matrix(kDx, kBatch, rng);
        Eigen::MatrixXd y = random_matrix(kDy, kBatch, rng);
        Eigen::MatrixXd xhat = random_matrix(kDx, kBatch, rng);
        Eigen::MatrixXd yhat = random_matrix(kDy, kBatch, rng);
        std::vector<ParamView> params{{"xhat", xhat.data(), xhat.size()},
                                      {"yhat", yhat.data(), yhat.size()}};
        auto value_fn = [&]() { return reconstruction_loss(x, y, xhat, yhat, 1.0).value; };
        GradFn grad_fn = maybe_corrupt(
            [&]() {
                ReconstructionResult r = reconstruction_loss(x, y, xhat, yhat, 1.0);
                return std::vector<Eigen::VectorXd>{
                    Eigen::Map<const Eigen::VectorXd>(r.grad_xhat.data(), r.grad_xhat.size()),
                    Eigen::Map<const Eigen::VectorXd>(r.grad_yhat.data(), r.grad_yhat.size())};
            },
            corrupt);
        Rng coords = substream(seed, "coords");
        return gradcheck(value_fn, grad_fn, params, kCoords, kStep, coords).max_rel_error;
    }});

    checks.push_back({"kl", [](std::uint64_t seed, bool corrupt) {
        Rng rng = substream(seed, "kl-data");
        Eigen::MatrixXd z = random_matrix(kDzTilde, kBatch, rng);
        std::vector<ParamView> params{{"zpriv", z.data(), z.size()}};
        auto value_fn = [&]() { return kl_loss(z).value; };
        GradFn grad_fn = maybe_corrupt(
            [&]() {
                KlResult r = kl_loss(z);
                return std::vector<Eigen::VectorXd>{
                    Eigen::Map<const Eigen::VectorXd>(r.grad.data(), r.grad.size())};
            },
            corrupt);
        Rng coords = substream(seed, "coords");
        return gradcheck(value_fn, grad_fn, params, kCoords, kStep, coords).max_rel_error;
    }});

    for (Dependence dep : {Dependence::cca, Dependence::mmi, Dependence::contrastive}) {
        for (bool autoenc : {false, true}) {
            for (bool priv : {false, true}) {
                std::string name = "total-" + to_string(dep);
                if (autoenc) name += "-autoenc";
                if (priv) name += "-priv";
                checks.push_back({name, [dep, autoenc, priv](std::uint64_t seed, bool corrupt) {
                    return check_total(seed, corrupt, dep, MmiMode::sample_mean, autoenc, priv);
                }});
            }
        }
    }
    return checks;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradcheck_suite(const GradSuiteOptions& options) {
    std::vector<GradSuiteEntry> entries;
    for (const Check& check : build_checks()) {
        if (!options.only.empty() && check.name.rfind(options.only, 0) != 0) continue;
        GradSuiteEntry entry;
        entry.name = check.name;
        const bool corrupt = options.corrupt == check.name;
        for (int i = 0; i < options.configs_per_loss; ++i) {
            const std::uint64_t run_seed = options.seed + 1000003ULL * static_cast<std::uint64_t>(i);
            entry.max_rel_error = std::max(entry.max_rel_error, check.run(run_seed, corrupt));
        }
        entry.pass = entry.max_rel_error < options.tolerance;
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace transience
