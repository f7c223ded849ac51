#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "transience/errors.hpp"
#include "transience/linalg.hpp"
#include "transience/losses.hpp"
#include "transience/rng.hpp"

using namespace transience;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = gaussian(rng);
    }
    return m;
}

// classical CCA by whitening + eigendecomposition of T T^T: an independent
// route to sqrt(sum rho_i^2) through matkernel instead of the inverse-based
// trace the implementation uses
double classical_cca_value(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy, double reg) {
    Eigen::MatrixXd sxx = covariance(zx, zx, reg);
    Eigen::MatrixXd syy = covariance(zy, zy, reg);
    Eigen::MatrixXd sxy = covariance(zx, zy);
    Eigen::MatrixXd wx = inv_sqrt_psd(sxx, 1e-14);
    Eigen::MatrixXd wy = inv_sqrt_psd(syy, 1e-14);
    Eigen::MatrixXd t = wx * sxy * wy;
    SymmetricEigen eig = sym_eig(t * t.transpose());
    return std::sqrt(eig.eigenvalues.cwiseMax(0.0).sum());
}

}  // namespace

TEST_CASE("cca_loss of a view against itself approaches sqrt(d_z)") {
    Rng rng = substream(300, "cca-self");
    Eigen::MatrixXd zx = random_matrix(4, 200, rng);
    CcaResult r = cca_loss(zx, zx, 1e-10);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("cca_loss of independent views is near zero at large N") {
    Rng rng = substream(301, "cca-indep");
    Eigen::MatrixXd zx = random_matrix(3, 20000, rng);
    Eigen::MatrixXd zy = random_matrix(3, 20000, rng);
    CcaResult r = cca_loss(zx, zy, 1e-4);
    CHECK(r.value < 0.15);
}

TEST_CASE("cca_loss equals the classical generalized-eigenproblem oracle") {
    Rng rng = substream(302, "cca-oracle");
    // 5-D and 7-D views with planted linear structure
    Eigen::MatrixXd base = random_matrix(5, 300, rng);
    Eigen::MatrixXd zx = base;
    Eigen::MatrixXd zy = random_matrix(7, 5, rng) * base + 0.5 * random_matrix(7, 300, rng);
    CcaResult r = cca_loss(zx, zy, 1e-10);
    const double oracle = classical_cca_value(zx, zy, 1e-10);
    CHECK(r.value == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("cca_loss value stays in [0, sqrt(d_z)] up to regularization slack") {
    Rng rng = substream(303, "cca-range");
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd zx = random_matrix(4, 60, rng);
        Eigen::MatrixXd zy = 0.8 * zx + 0.6 * random_matrix(4, 60, rng);
        CcaResult r = cca_loss(zx, zy, 1e-4);
        CHECK(r.value >= 0.0);
        CHECK(r.value <= 2.0 + 1e-6);
    }
}

TEST_CASE("cca_loss is invariant to well-conditioned maps of one view") {
    Rng rng = substream(304, "cca-affine");
    Eigen::MatrixXd zx = random_matrix(4, 120, rng);
    Eigen::MatrixXd zy = random_matrix(4, 5, rng).topRows(4) * zx +
                         0.3 * random_matrix(4, 120, rng);
    // A = Q1 diag(s) Q2^T with singular values in [0.5, 5] (condition <= 10)
    Eigen::HouseholderQR<Eigen::MatrixXd> qr1(random_matrix(4, 4, rng));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr2(random_matrix(4, 4, rng));
    Eigen::VectorXd s(4);
    s << 0.5, 1.0, 2.0, 5.0;
    Eigen::MatrixXd a = Eigen::MatrixXd(qr1.householderQ()) * s.asDiagonal() *
                        Eigen::MatrixXd(qr2.householderQ()).transpose();
    const double before = cca_loss(zx, zy, 1e-10).value;
    const double after = cca_loss(a * zx, zy, 1e-10).value;
    CHECK(after == doctest::Approx(before).epsilon(1e-6));
}

TEST_CASE("cca_loss rejects batches not exceeding the latent dim") {
    Rng rng = substream(305, "cca-small");
    Eigen::MatrixXd zx = random_matrix(4, 4, rng);
    CHECK_THROWS_AS(cca_loss(zx, zx, 1e-4), IllConditionedBatchError);
}

TEST_CASE("mmi_loss near zero for independent views") {
    Rng rng = substream(306, "mmi-indep");
    Eigen::MatrixXd zx = random_matrix(2, 2000, rng);
    Eigen::MatrixXd zy = random_matrix(2, 2000, rng);
    MmiResult r = mmi_loss(zx, zy, KdeBandwidths{}, MmiMode::sample_mean);
    CHECK(std::abs(r.value) < 0.1);
}

TEST_CASE("mmi_loss ranks identical views above shuffled views") {
    Rng rng = substream(307, "mmi-order");
    Eigen::MatrixXd zx = random_matrix(2, 300, rng);
    Eigen::MatrixXd shuffled = zx;
    std::vector<int> perm(300);
    for (int i = 0; i < 300; ++i) perm[i] = (i + 151) % 300;
    for (int i = 0; i < 300; ++i) shuffled.col(i) = zx.col(perm[i]);
    const double dependent = mmi_loss(zx, zx, KdeBandwidths{}, MmiMode::sample_mean).value;
    const double independent = mmi_loss(zx, shuffled, KdeBandwidths{}, MmiMode::sample_mean).value;
    CHECK(dependent > independent);
}

TEST_CASE("mmi_loss approximates analytic Gaussian mutual information") {
    // 1-D pair with correlation 0.9: MI = -log(1 - 0.81)/2 ~ 0.8304
    Rng rng = substream(308, "mmi-gauss");
    const int n = 5000;
    Eigen::MatrixXd zx(1, n), zy(1, n);
    const double rho = 0.9;
    for (int i = 0; i < n; ++i) {
        const double a = gaussian(rng);
        const double b = gaussian(rng);
        zx(0, i) = a;
        zy(0, i) = rho * a + std::sqrt(1.0 - rho * rho) * b;
    }
    KdeBandwidths bw;
    bw.log_sigma.setConstant(std::log(0.25));  // moderate bandwidth for N=5000
    MmiResult r = mmi_loss(zx, zy, bw, MmiMode::sample_mean);
    const double analytic = -0.5 * std::log(1.0 - rho * rho);
    CHECK(r.value > 0.7 * analytic);
    CHECK(r.value < 1.3 * analytic);
}

TEST_CASE("mmi_loss literal mode weights log-ratios by the joint density") {
    Rng rng = substream(309, "mmi-literal");
    Eigen::MatrixXd zx = random_matrix(2, 40, rng);
    Eigen::MatrixXd zy = random_matrix(2, 40, rng);
    KdeBandwidths bw;
    MmiResult lit = mmi_loss(zx, zy, bw, MmiMode::literal);
    // independent oracle for the value: direct double loop over Eq.-style sums
    const int n = 40;
    auto density = [&](const Eigen::MatrixXd& pts, int i, double sigma) {
        double acc = 0.0;
        const double d = static_cast<double>(pts.rows());
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double r2 = (pts.col(i) - pts.col(j)).squaredNorm();
            acc += std::exp(-r2 / (2 * sigma * sigma)) *
                   std::pow(2 * M_PI * sigma * sigma, -d / 2.0);
        }
        return acc / (n - 1);
    };
    Eigen::MatrixXd joint(4, n);
    joint << zx, zy;
    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pj = density(joint, i, bw.sigma_joint());
        const double px = density(zx, i, bw.sigma_x());
        const double py = density(zy, i, bw.sigma_y());
        expected += pj * std::log(pj / (px * py));
    }
    CHECK(lit.value == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("mmi_loss rejects batches below 3 and flags clamped bandwidths") {
    Rng rng = substream(310, "mmi-small");
    Eigen::MatrixXd zx = random_matrix(2, 2, rng);
    CHECK_THROWS_AS(mmi_loss(zx, zx, KdeBandwidths{}, MmiMode::sample_mean),
                    std::invalid_argument);
    Eigen::MatrixXd z = random_matrix(2, 10, rng);
    KdeBandwidths bw;
    bw.log_sigma.setConstant(std::log(1e-9));
    MmiResult r = mmi_loss(z, z, bw, MmiMode::sample_mean);
    CHECK(r.bandwidth_clamped);
}

TEST_CASE("kde leave-one-out density integrates to 1 on a 1-D grid") {
    Rng rng = substream(311, "kde-quad");
    const int n = 50;
    Eigen::MatrixXd samples(1, n);
    for (int i = 0; i < n; ++i) samples(0, i) = 0.5 * gaussian(rng);
    const double sigma = 1.0;
    const double lo = -8.0 * sigma + samples.minCoeff();
    const double hi = 8.0 * sigma + samples.maxCoeff();
    const int steps = 8000;
    const double h = (hi - lo) / steps;
    double integral = 0.0;
    for (int k = 0; k <= steps; ++k) {
        Eigen::VectorXd q(1);
        q[0] = lo + k * h;
        const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
        integral += w * kde_loo_density(q, samples, 0, sigma);
    }
    integral *= h;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("contrastive hand case: satisfied margin gives zero loss") {
    // positives identical (d=0), negatives orthogonal (d=1), m=0.5:
    // max(0, 0.5 + 0 - 1) = 0
    Eigen::MatrixXd zx(2, 2), zy(2, 2);
    zx << 1, 0, 0, 1;
    zy << 1, 0, 0, 1;
    ContrastiveResult r = contrastive_loss(zx, zy, {1, 0}, 0.5);
    CHECK(r.value == 0.0);
    CHECK(r.grad_zx.isZero(0.0));
}

TEST_CASE("contrastive hand case: inverted pairs give exactly 1.5") {
    // positives orthogonal (d=1), negatives identical (d=0), m=0.5:
    // each term is 0.5 + 1 - 0 = 1.5
    Eigen::MatrixXd zx(2, 2), zy(2, 2);
    zx << 1, 0, 0, 1;
    zy << 0, 1, 1, 0;  // zy_i orthogonal to zx_i, zy_neg(i) equal to zx_i
    ContrastiveResult r = contrastive_loss(zx, zy, {1, 0}, 0.5);
    CHECK(r.value == 1.5);
}

TEST_CASE("contrastive_loss is nonnegative and zero when every margin is met") {
    Rng rng = substream(312, "contrast-prop");
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd zx = random_matrix(3, 16, rng);
        Eigen::MatrixXd zy = random_matrix(3, 16, rng);
        std::vector<int> neg = circular_derangement(16, rng);
        ContrastiveResult r = contrastive_loss(zx, zy, neg, 0.5);
        CHECK(r.value >= 0.0);
    }
}

TEST_CASE("contrastive_loss validates the derangement") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(contrastive_loss(z, z, {0, 1}, 0.5), std::invalid_argument);  // fixed points
    CHECK_THROWS_AS(contrastive_loss(z, z, {1, 1}, 0.5), std::invalid_argument);  // not a permutation
    CHECK_THROWS_AS(contrastive_loss(z, z, {1}, 0.5), std::invalid_argument);     // wrong length
}

TEST_CASE("contrastive_loss guards zero-norm latents and reports it") {
    Eigen::MatrixXd zx(2, 2), zy(2, 2);
    zx << 0, 0, 0, 1;  // first column has zero norm
    zy << 1, 0, 0, 1;
    ContrastiveResult r = contrastive_loss(zx, zy, {1, 0}, 0.5);
    CHECK(r.zero_norm_guard_hit);
    CHECK(std::isfinite(r.value));
}

TEST_CASE("circular derangement has no fixed points and is a permutation") {
    Rng rng = substream(313, "derange");
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> neg = circular_derangement(17, rng);
        std::vector<bool> seen(17, false);
        for (int i = 0; i < 17; ++i) {
            CHECK(neg[i] != i);
            CHECK(!seen[neg[i]]);
            seen[neg[i]] = true;
        }
    }
}

TEST_CASE("reconstruction_loss hand cases") {
    Eigen::MatrixXd x(2, 1), xhat(2, 1), y(1, 1), yhat(1, 1);
    x << 1, 2;
    xhat << 0, 0;
    y << 5;
    yhat << 5;
    // residual x - xhat = (1,2), y exact: lambda/N * (1 + 4 + 0) = 5
    ReconstructionResult r = reconstruction_loss(x, y, xhat, yhat, 1.0);
    CHECK(r.value == doctest::Approx(5.0));
    ReconstructionResult perfect = reconstruction_loss(x, y, x, y, 1.0);
    CHECK(perfect.value == 0.0);
}

TEST_CASE("kl_loss is zero at exactly standard moments") {
    // per dim: half +1, half -1 -> mean 0, biased variance 1
    Eigen::MatrixXd z(2, 4);
    z << 1, -1, 1, -1, -1, 1, -1, 1;
    KlResult r = kl_loss(z);
    CHECK(std::abs(r.value) < 1e-12);
}

TEST_CASE("kl_loss hand case: mean 1, variance 1 contributes exactly 0.5") {
    Eigen::MatrixXd z(1, 2);
    z << 0, 2;  // mean 1, biased variance 1
    KlResult r = kl_loss(z);
    CHECK(r.value == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("kl_loss is nonnegative on random batches") {
    Rng rng = substream(314, "kl-prop");
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::MatrixXd z = 2.0 * random_matrix(3, 20, rng);
        CHECK(kl_loss(z).value >= -1e-12);
    }
    CHECK_THROWS_AS(kl_loss(Eigen::MatrixXd::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("total_objective reduces to the dependence term when flags are off") {
    Rng rng_init = substream(315, "tot-init");
    StackSpec spec;
    spec.d_x = 5;
    spec.d_y = 6;
    spec.d_z = 3;
    spec.hidden = {7};
    EncoderStack stack = make_encoder_stack(spec, rng_init);

    Rng rng_data = substream(315, "tot-data");
    Eigen::MatrixXd xb = random_matrix(5, 24, rng_data);
    Eigen::MatrixXd yb = random_matrix(6, 24, rng_data);

    LossConfig cfg;
    cfg.dependence = Dependence::cca;
    Rng r = substream(315, "tot-rng");
    ObjectiveResult res = total_objective(stack, xb, yb, cfg, r);
    const double direct =
        cca_loss(forward(stack.encoder_x, xb), forward(stack.encoder_y, yb), cfg.cca_regularizer)
            .value;
    CHECK(res.value == doctest::Approx(-direct).epsilon(1e-12));
    CHECK(res.recon_term == 0.0);
    CHECK(res.kl_term == 0.0);
}

TEST_CASE("total_objective equals the hand-summed constituents with all terms on") {
    Rng rng_init = substream(316, "tot2-init");
    StackSpec spec;
    spec.d_x = 4;
    spec.d_y = 5;
    spec.d_z = 3;
    spec.d_z_tilde = 2;
    spec.hidden = {6};
    spec.use_autoencoder = true;
    spec.use_private = true;
    EncoderStack stack = make_encoder_stack(spec, rng_init);

    Rng rng_data = substream(316, "tot2-data");
    Eigen::MatrixXd xb = random_matrix(4, 12, rng_data);
    Eigen::MatrixXd yb = random_matrix(5, 12, rng_data);

    LossConfig cfg;
    cfg.dependence = Dependence::cca;
    cfg.use_autoencoder = true;
    cfg.use_private = true;
    cfg.sigma_noise = 0.0;  // clean reconstruction path so the sum is reproducible
    cfg.lambda = 0.7;
    cfg.kappa = 1.3;

    Rng r = substream(316, "tot2-rng");
    ObjectiveResult res = total_objective(stack, xb, yb, cfg, r);

    Eigen::MatrixXd zx = forward(stack.encoder_x, xb);
    Eigen::MatrixXd zy = forward(stack.encoder_y, yb);
    Eigen::MatrixXd zpx = forward(stack.private_x, xb);
    Eigen::MatrixXd zpy = forward(stack.private_y, yb);
    Eigen::MatrixXd dec_in_x(5, 12), dec_in_y(5, 12);
    dec_in_x << zx, zpx;
    dec_in_y << zy, zpy;
    Eigen::MatrixXd xhat = forward(stack.decoder_x, dec_in_x);
    Eigen::MatrixXd yhat = forward(stack.decoder_y, dec_in_y);

    const double expected = -cca_loss(zx, zy, cfg.cca_regularizer).value +
                            reconstruction_loss(xb, yb, xhat, yhat, cfg.lambda).value +
                            cfg.kappa * (kl_loss(zpx).value + kl_loss(zpy).value);
    CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("total_objective consumes rng deterministically") {
    Rng rng_init = substream(317, "tot3-init");
    StackSpec spec;
    spec.d_x = 4;
    spec.d_y = 4;
    spec.d_z = 2;
    spec.hidden = {5};
    spec.use_autoencoder = true;
    EncoderStack stack = make_encoder_stack(spec, rng_init);
    Rng rng_data = substream(317, "tot3-data");
    Eigen::MatrixXd xb = random_matrix(4, 10, rng_data);
    Eigen::MatrixXd yb = random_matrix(4, 10, rng_data);
    LossConfig cfg;
    cfg.dependence = Dependence::contrastive;
    cfg.use_autoencoder = true;
    Rng r1 = substream(317, "tot3-rng");
    Rng r2 = substream(317, "tot3-rng");
    ObjectiveResult a = total_objective(stack, xb, yb, cfg, r1);
    ObjectiveResult b = total_objective(stack, xb, yb, cfg, r2);
    CHECK(a.value == b.value);
    CHECK(a.grads.encoder_x.layers[0].weights == b.grads.encoder_x.layers[0].weights);
}

TEST_CASE("LossConfig validation rejects bad hyperparameters") {
    LossConfig cfg;
    cfg.margin = -0.1;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = {};
    cfg.cca_regularizer = 0.0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}
