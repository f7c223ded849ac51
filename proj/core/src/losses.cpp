#include "transience/losses.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "transience/errors.hpp"

namespace transience {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr double kNormGuard = 1e-12;

double clamp_sigma(double log_sigma) {
    return std::max(std::exp(log_sigma), kSigmaFloor);
}

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& m) {
    return m.colwise() - m.rowwise().mean().eval();
}

// Right-multiplication by the centering matrix C = I - 11^T/N: subtracts the
// per-row mean across columns. Chains gradients through column centering.
Eigen::MatrixXd apply_centering(const Eigen::MatrixXd& g) {
    return g.colwise() - g.rowwise().mean().eval();
}

}  // namespace

std::string to_string(Dependence d) {
    switch (d) {
        case Dependence::cca: return "cca";
        case Dependence::mmi: return "mmi";
        case Dependence::contrastive: return "contrastive";
    }
    return "?";
}

Dependence dependence_from_string(const std::string& s) {
    if (s == "cca") return Dependence::cca;
    if (s == "mmi") return Dependence::mmi;
    if (s == "contrastive") return Dependence::contrastive;
    throw std::invalid_argument("unknown dependence loss: " + s);
}

std::string to_string(MmiMode m) {
    return m == MmiMode::literal ? "literal" : "sample_mean";
}

MmiMode mmi_mode_from_string(const std::string& s) {
    if (s == "literal") return MmiMode::literal;
    if (s == "sample_mean") return MmiMode::sample_mean;
    throw std::invalid_argument("unknown mmi_mode: " + s);
}

void validate(const LossConfig& cfg) {
    if (cfg.margin < 0.0) throw std::invalid_argument("LossConfig: margin must be >= 0");
    if (cfg.lambda < 0.0) throw std::invalid_argument("LossConfig: lambda must be >= 0");
    if (cfg.kappa < 0.0) throw std::invalid_argument("LossConfig: kappa must be >= 0");
    if (cfg.cca_regularizer <= 0.0) throw std::invalid_argument("LossConfig: cca_regularizer must be > 0");
    if (cfg.sigma_noise < 0.0) throw std::invalid_argument("LossConfig: sigma_noise must be >= 0");
}

KdeBandwidths KdeBandwidths::from_log(const Eigen::Vector3d& log_sigma) {
    KdeBandwidths bw;
    bw.log_sigma = log_sigma;
    return bw;
}

double KdeBandwidths::sigma_joint() const { return clamp_sigma(log_sigma[0]); }
double KdeBandwidths::sigma_x() const { return clamp_sigma(log_sigma[1]); }
double KdeBandwidths::sigma_y() const { return clamp_sigma(log_sigma[2]); }

bool KdeBandwidths::clamped() const {
    return std::exp(log_sigma[0]) < kSigmaFloor || std::exp(log_sigma[1]) < kSigmaFloor ||
           std::exp(log_sigma[2]) < kSigmaFloor;
}

CcaResult cca_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy, double reg) {
    if (reg <= 0.0) {
        throw std::invalid_argument("cca_loss: regularizer must be positive");
    }
    const auto n = zx.cols();
    if (zy.cols() != n) {
        throw std::invalid_argument("cca_loss: views must share the batch size");
    }
    const auto dx = zx.rows();
    const auto dy = zy.rows();
    if (n <= std::max(dx, dy)) {
        throw IllConditionedBatchError("cca_loss: batch size must exceed the latent dimension");
    }

    const double f = 1.0 / static_cast<double>(n - 1);
    Eigen::MatrixXd h = center_columns(zx);
    Eigen::MatrixXd g = center_columns(zy);
    Eigen::MatrixXd sxx = f * (h * h.transpose());
    sxx.diagonal().array() += reg;
    Eigen::MatrixXd syy = f * (g * g.transpose());
    syy.diagonal().array() += reg;
    Eigen::MatrixXd sxy = f * (h * g.transpose());

    Eigen::LDLT<Eigen::MatrixXd> ax(sxx);
    Eigen::LDLT<Eigen::MatrixXd> ay(syy);
    Eigen::MatrixXd m_inv = ax.solve(Eigen::MatrixXd::Identity(dx, dx));
    Eigen::MatrixXd k_inv = ay.solve(Eigen::MatrixXd::Identity(dy, dy));

    Eigen::MatrixXd e = m_inv * sxy;              // Sxx^{-1} Sxy
    Eigen::MatrixXd fm = k_inv * sxy.transpose(); // Syy^{-1} Syx
    // tr(T^T T) = tr(Sxx^{-1} Sxy Syy^{-1} Syx)
    const double s = (e.array() * fm.transpose().array()).sum();
    const double value = std::sqrt(std::max(s, 0.0));

    Eigen::MatrixXd g_sxy = 2.0 * e * k_inv;
    Eigen::MatrixXd g_sxx = -e * fm * m_inv;
    Eigen::MatrixXd g_syy = -fm * e * k_inv;
    g_sxx = 0.5 * (g_sxx + g_sxx.transpose()).eval();
    g_syy = 0.5 * (g_syy + g_syy.transpose()).eval();

    Eigen::MatrixXd grad_h = f * (g_sxy * g) + 2.0 * f * (g_sxx * h);
    Eigen::MatrixXd grad_g = f * (g_sxy.transpose() * h) + 2.0 * f * (g_syy * g);

    const double scale = 1.0 / (2.0 * std::max(value, 1e-12));
    CcaResult result;
    result.value = value;
    result.grad_zx = scale * apply_centering(grad_h);
    result.grad_zy = scale * apply_centering(grad_g);
    return result;
}

namespace {

// One leave-one-out KDE density: log p_i for every sample, plus streaming
// gradient accumulation. Work is O(N^2 d) time, O(N) memory.
struct KdeDensity {
    const Eigen::MatrixXd& v;  // dv x N samples
    double sigma;
    double log_const;          // log (2 pi sigma^2)^{-dv/2}
    Eigen::VectorXd sq_norms;
    Eigen::VectorXd logp;

    KdeDensity(const Eigen::MatrixXd& samples, double sigma_in)
        : v(samples), sigma(sigma_in) {
        const auto dv = static_cast<double>(v.rows());
        log_const = -0.5 * dv * std::log(2.0 * std::numbers::pi * sigma * sigma);
        sq_norms = v.colwise().squaredNorm();
        compute_logp();
    }

    Eigen::VectorXd row_sq_dist(Eigen::Index i) const {
        Eigen::VectorXd r = (sq_norms.array() + sq_norms[i] - 2.0 * (v.transpose() * v.col(i)).array()).matrix();
        return r.cwiseMax(0.0);
    }

    void compute_logp() {
        const auto n = v.cols();
        logp.resize(n);
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd r = row_sq_dist(i);
            double max_term = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                max_term = std::max(max_term, -r[j] * inv2s2);
            }
            double acc = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                acc += std::exp(-r[j] * inv2s2 - max_term);
            }
            logp[i] = log_const + max_term + std::log(acc) - std::log(static_cast<double>(n - 1));
        }
    }

    // Accumulates d(loss)/d(samples) and d(loss)/d(log sigma) given the
    // coefficient vectors of the pairwise form: the contribution of pair
    // (m, j) to the sample gradient is -(b_m + b_j) k_mj (v_m - v_j)/sigma^2
    // and log-kernel ratios are used where `log_ratio_to` supplies a stable
    // exponent base (log p_m) to divide by; pass nullptr for plain b*k terms.
    void accumulate(const Eigen::VectorXd& b, const Eigen::VectorXd* log_ratio_base,
                    Eigen::MatrixXd& grad_v, double& grad_log_sigma) const {
        const auto n = v.cols();
        const double dv = static_cast<double>(v.rows());
        const double inv_s2 = 1.0 / (sigma * sigma);
        const double inv2s2 = 0.5 * inv_s2;
        const double pair_scale = inv_s2 / static_cast<double>(n - 1);
        Eigen::VectorXd weighted(n);
        for (Eigen::Index m = 0; m < n; ++m) {
            Eigen::VectorXd r = row_sq_dist(m);
            // w_j = b_m k_mj and w'_j = b_j k_mj, combined below
            double bw_sum = 0.0;  // for the bandwidth gradient: b_m sum_j k_mj (r/s^2 - dv)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == m) {
                    weighted[j] = 0.0;
                    continue;
                }
                const double logk = log_const - r[j] * inv2s2;
                double bm_k = 0.0, bj_k = 0.0;
                if (log_ratio_base) {
                    bm_k = b[m] * std::exp(logk - (*log_ratio_base)[m]);
                    bj_k = b[j] * std::exp(logk - (*log_ratio_base)[j]);
                } else {
                    const double k = std::exp(logk);
                    bm_k = b[m] * k;
                    bj_k = b[j] * k;
                }
                weighted[j] = (bm_k + bj_k) * pair_scale;
                bw_sum += bm_k * (r[j] * inv_s2 - dv);
            }
            grad_v.col(m) += v * weighted - v.col(m) * weighted.sum();
            grad_log_sigma += bw_sum / static_cast<double>(n - 1);
        }
    }
};

}  // namespace

double kde_loo_density(const Eigen::VectorXd& query, const Eigen::MatrixXd& samples,
                       int exclude, double sigma) {
    const auto n = samples.cols();
    if (n < 2) throw std::invalid_argument("kde_loo_density: need at least 2 samples");
    if (query.size() != samples.rows()) {
        throw std::invalid_argument("kde_loo_density: query dim mismatch");
    }
    const double s = std::max(sigma, kSigmaFloor);
    const auto dv = static_cast<double>(samples.rows());
    const double log_const = -0.5 * dv * std::log(2.0 * std::numbers::pi * s * s);
    const double inv2s2 = 1.0 / (2.0 * s * s);
    double acc = 0.0;
    int used = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == exclude) continue;
        acc += std::exp(log_const - (query - samples.col(j)).squaredNorm() * inv2s2);
        ++used;
    }
    return acc / static_cast<double>(used);
}

MmiResult mmi_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                   const KdeBandwidths& bw, MmiMode mode) {
    const auto n = zx.cols();
    if (zy.cols() != n) {
        throw std::invalid_argument("mmi_loss: views must share the batch size");
    }
    if (n < 3) {
        throw std::invalid_argument("mmi_loss: need at least 3 samples for leave-one-out densities");
    }
    const auto dx = zx.rows();
    const auto dy = zy.rows();

    MmiResult result;
    result.bandwidth_clamped = bw.clamped();

    Eigen::MatrixXd joint(dx + dy, n);
    joint.topRows(dx) = zx;
    joint.bottomRows(dy) = zy;

    KdeDensity dj(joint, bw.sigma_joint());
    KdeDensity dxm(zx, bw.sigma_x());
    KdeDensity dym(zy, bw.sigma_y());

    const double n_d = static_cast<double>(n);
    Eigen::VectorXd log_ratio = dj.logp - dxm.logp - dym.logp;

    Eigen::VectorXd b_joint(n), b_x(n), b_y(n);
    const Eigen::VectorXd* base_joint = nullptr;
    const Eigen::VectorXd* base_x = nullptr;
    const Eigen::VectorXd* base_y = nullptr;
    if (mode == MmiMode::sample_mean) {
        result.value = log_ratio.mean();
        // dL/dp_i = 1/(N p_i) for the joint, -1/(N p_i) for the marginals;
        // the 1/p factors are folded into log-space kernel ratios.
        b_joint.setConstant(1.0 / n_d);
        b_x.setConstant(-1.0 / n_d);
        b_y.setConstant(-1.0 / n_d);
        base_joint = &dj.logp;
        base_x = &dxm.logp;
        base_y = &dym.logp;
    } else {
        Eigen::VectorXd p_joint = dj.logp.array().exp();
        result.value = (p_joint.array() * log_ratio.array()).sum();
        b_joint = log_ratio.array() + 1.0;
        b_x = -(dj.logp - dxm.logp).array().exp();
        b_y = -(dj.logp - dym.logp).array().exp();
    }

    Eigen::MatrixXd grad_joint = Eigen::MatrixXd::Zero(dx + dy, n);
    result.grad_zx = Eigen::MatrixXd::Zero(dx, n);
    result.grad_zy = Eigen::MatrixXd::Zero(dy, n);
    dj.accumulate(b_joint, base_joint, grad_joint, result.grad_log_sigma[0]);
    dxm.accumulate(b_x, base_x, result.grad_zx, result.grad_log_sigma[1]);
    dym.accumulate(b_y, base_y, result.grad_zy, result.grad_log_sigma[2]);
    result.grad_zx += grad_joint.topRows(dx);
    result.grad_zy += grad_joint.bottomRows(dy);
    return result;
}

std::vector<int> circular_derangement(int n, Rng& rng) {
    if (n < 2) {
        throw std::invalid_argument("circular_derangement: need at least 2 samples");
    }
    const int offset = static_cast<int>(uniform_int(rng, 1, n - 1));
    std::vector<int> neg(n);
    for (int i = 0; i < n; ++i) neg[i] = (i + offset) % n;
    return neg;
}

namespace {

struct CosineDistance {
    double d = 0.0;
    Eigen::VectorXd du, dv;
    bool guarded = false;
};

CosineDistance cosine_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    CosineDistance out;
    const double nu = u.norm();
    const double nv = v.norm();
    double denom = nu * nv;
    if (denom < kNormGuard) {
        denom = kNormGuard;
        out.guarded = true;
    }
    const double cos = u.dot(v) / denom;
    out.d = 1.0 - cos;
    if (out.guarded) {
        out.du = -v / denom;
        out.dv = -u / denom;
    } else {
        out.du = -(v / denom) + (cos / (nu * nu)) * u;
        out.dv = -(u / denom) + (cos / (nv * nv)) * v;
    }
    return out;
}

}  // namespace

ContrastiveResult contrastive_loss(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                                   const std::vector<int>& negatives, double margin) {
    const auto n = zx.cols();
    if (zy.cols() != n || zx.rows() != zy.rows()) {
        throw std::invalid_argument("contrastive_loss: latent shapes must match");
    }
    if (static_cast<Eigen::Index>(negatives.size()) != n) {
        throw std::invalid_argument("contrastive_loss: negatives must have one entry per sample");
    }
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int j = negatives[static_cast<std::size_t>(i)];
        if (j < 0 || j >= n || j == i || seen[static_cast<std::size_t>(j)]) {
            throw std::invalid_argument("contrastive_loss: negatives must be a derangement");
        }
        seen[static_cast<std::size_t>(j)] = true;
    }

    ContrastiveResult result;
    result.grad_zx = Eigen::MatrixXd::Zero(zx.rows(), n);
    result.grad_zy = Eigen::MatrixXd::Zero(zy.rows(), n);
    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int j = negatives[static_cast<std::size_t>(i)];
        CosineDistance pos = cosine_distance(zx.col(i), zy.col(i));
        CosineDistance neg = cosine_distance(zx.col(i), zy.col(j));
        result.zero_norm_guard_hit |= pos.guarded || neg.guarded;
        const double arg = margin + pos.d - neg.d;
        if (arg > 0.0) {  // hinge kink itself takes subgradient 0
            total += arg;
            result.grad_zx.col(i) += inv_n * (pos.du - neg.du);
            result.grad_zy.col(i) += inv_n * pos.dv;
            result.grad_zy.col(j) -= inv_n * neg.dv;
        }
    }
    result.value = total * inv_n;
    return result;
}

ReconstructionResult reconstruction_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                         const Eigen::MatrixXd& xhat, const Eigen::MatrixXd& yhat,
                                         double lambda) {
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols() ||
        y.rows() != yhat.rows() || y.cols() != yhat.cols() || x.cols() != y.cols()) {
        throw std::invalid_argument("reconstruction_loss: shape mismatch");
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("reconstruction_loss: lambda must be >= 0");
    }
    const double scale = lambda / static_cast<double>(x.cols());
    ReconstructionResult result;
    Eigen::MatrixXd rx = xhat - x;
    Eigen::MatrixXd ry = yhat - y;
    result.value = scale * (rx.squaredNorm() + ry.squaredNorm());
    result.grad_xhat = 2.0 * scale * rx;
    result.grad_yhat = 2.0 * scale * ry;
    return result;
}

KlResult kl_loss(const Eigen::MatrixXd& zpriv) {
    const auto n = zpriv.cols();
    if (n < 2) {
        throw std::invalid_argument("kl_loss: need at least 2 samples");
    }
    constexpr double kVarFloor = 1e-8;
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd mean = zpriv.rowwise().mean();
    Eigen::MatrixXd centered = zpriv.colwise() - mean;
    Eigen::VectorXd var = centered.array().square().rowwise().sum() * inv_n;  // biased (1/N)

    KlResult result;
    result.grad = Eigen::MatrixXd::Zero(zpriv.rows(), n);
    double value = 0.0;
    for (Eigen::Index i = 0; i < zpriv.rows(); ++i) {
        const bool floored = var[i] < kVarFloor;
        const double v = floored ? kVarFloor : var[i];
        value += 0.5 * (v + mean[i] * mean[i] - 1.0 - std::log(v));
        const double dvar = floored ? 0.0 : 0.5 * (1.0 - 1.0 / v);
        result.grad.row(i) = (mean[i] * inv_n + (2.0 * inv_n * dvar) * centered.row(i).array()).matrix();
    }
    result.value = value;
    return result;
}

namespace {

Eigen::MatrixXd vstack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
    Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

}  // namespace

ObjectiveResult total_objective(const EncoderStack& stack, const Eigen::MatrixXd& xb,
                                const Eigen::MatrixXd& yb, const LossConfig& cfg, Rng& rng) {
    validate(cfg);
    const auto n = xb.cols();
    if (n < 1 || yb.cols() != n) {
        throw std::invalid_argument("total_objective: batch must be nonempty and aligned");
    }
    if (xb.rows() != stack.encoder_x.input_dim() || yb.rows() != stack.encoder_y.input_dim()) {
        throw std::invalid_argument("total_objective: batch dims do not match the encoders");
    }

    ObjectiveResult res;
    res.grads.encoder_x = zero_grads(stack.encoder_x);
    res.grads.encoder_y = zero_grads(stack.encoder_y);
    if (stack.use_private) {
        res.grads.private_x = zero_grads(stack.private_x);
        res.grads.private_y = zero_grads(stack.private_y);
    }
    if (stack.use_autoencoder) {
        res.grads.decoder_x = zero_grads(stack.decoder_x);
        res.grads.decoder_y = zero_grads(stack.decoder_y);
    }

    // rng order: derangement, then noise for x, then noise for y
    std::vector<int> negatives;
    if (cfg.dependence == Dependence::contrastive) {
        negatives = circular_derangement(static_cast<int>(n), rng);
    }

    ForwardCache cache_fx, cache_gy;
    Eigen::MatrixXd zx = forward(stack.encoder_x, xb, &cache_fx);
    Eigen::MatrixXd zy = forward(stack.encoder_y, yb, &cache_gy);

    Eigen::MatrixXd dzx, dzy;
    switch (cfg.dependence) {
        case Dependence::cca: {
            CcaResult r = cca_loss(zx, zy, cfg.cca_regularizer);
            res.dep_term = -r.value;
            dzx = -r.grad_zx;
            dzy = -r.grad_zy;
            break;
        }
        case Dependence::mmi: {
            MmiResult r = mmi_loss(zx, zy, KdeBandwidths::from_log(stack.log_kde_sigma), cfg.mmi_mode);
            res.dep_term = -r.value;
            dzx = -r.grad_zx;
            dzy = -r.grad_zy;
            res.grads.log_kde_sigma = -r.grad_log_sigma;
            break;
        }
        case Dependence::contrastive: {
            ContrastiveResult r = contrastive_loss(zx, zy, negatives, cfg.margin);
            res.dep_term = r.value;
            dzx = r.grad_zx;
            dzy = r.grad_zy;
            break;
        }
    }
    backward(stack.encoder_x, cache_fx, dzx, res.grads.encoder_x);
    backward(stack.encoder_y, cache_gy, dzy, res.grads.encoder_y);

    ForwardCache cache_px, cache_py;
    Eigen::MatrixXd zpx, zpy;
    Eigen::MatrixXd dpriv_x, dpriv_y;

    if (stack.use_autoencoder) {
        Eigen::MatrixXd xn = inject_noise(xb, cfg.sigma_noise, rng);
        Eigen::MatrixXd yn = inject_noise(yb, cfg.sigma_noise, rng);
        ForwardCache cache_fx2, cache_gy2, cache_dx, cache_dy;
        Eigen::MatrixXd zxn = forward(stack.encoder_x, xn, &cache_fx2);
        Eigen::MatrixXd zyn = forward(stack.encoder_y, yn, &cache_gy2);
        Eigen::MatrixXd dec_in_x = zxn, dec_in_y = zyn;
        if (stack.use_private) {
            zpx = forward(stack.private_x, xn, &cache_px);
            zpy = forward(stack.private_y, yn, &cache_py);
            dec_in_x = vstack(zxn, zpx);
            dec_in_y = vstack(zyn, zpy);
        }
        Eigen::MatrixXd xhat = forward(stack.decoder_x, dec_in_x, &cache_dx);
        Eigen::MatrixXd yhat = forward(stack.decoder_y, dec_in_y, &cache_dy);
        ReconstructionResult rec = reconstruction_loss(xb, yb, xhat, yhat, cfg.lambda);
        res.recon_term = rec.value;
        Eigen::MatrixXd din_x = backward(stack.decoder_x, cache_dx, rec.grad_xhat, res.grads.decoder_x);
        Eigen::MatrixXd din_y = backward(stack.decoder_y, cache_dy, rec.grad_yhat, res.grads.decoder_y);
        backward(stack.encoder_x, cache_fx2, din_x.topRows(stack.d_z), res.grads.encoder_x);
        backward(stack.encoder_y, cache_gy2, din_y.topRows(stack.d_z), res.grads.encoder_y);
        if (stack.use_private) {
            dpriv_x = din_x.bottomRows(stack.d_z_tilde);
            dpriv_y = din_y.bottomRows(stack.d_z_tilde);
        }
    } else if (stack.use_private) {
        // no reconstruction pathway: private encoders see clean inputs
        zpx = forward(stack.private_x, xb, &cache_px);
        zpy = forward(stack.private_y, yb, &cache_py);
        dpriv_x = Eigen::MatrixXd::Zero(stack.d_z_tilde, n);
        dpriv_y = Eigen::MatrixXd::Zero(stack.d_z_tilde, n);
    }

    if (stack.use_private) {
        KlResult klx = kl_loss(zpx);
        KlResult kly = kl_loss(zpy);
        res.kl_term = cfg.kappa * (klx.value + kly.value);
        dpriv_x += cfg.kappa * klx.grad;
        dpriv_y += cfg.kappa * kly.grad;
        backward(stack.private_x, cache_px, dpriv_x, res.grads.private_x);
        backward(stack.private_y, cache_py, dpriv_y, res.grads.private_y);
    }

    res.value = res.dep_term + res.recon_term + res.kl_term;
    return res;
}

}  // namespace transience
