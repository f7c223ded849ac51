#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "transience/errors.hpp"
#include "transience/mlp.hpp"

using namespace transience;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) m(r, c) = gaussian(rng);
    }
    return m;
}

// straight-line re-evaluation, kept independent of forward()
Eigen::MatrixXd naive_forward(const Mlp& net, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Eigen::MatrixXd z(net.layers[l].weights.rows(), a.cols());
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                double acc = net.layers[l].bias[r];
                for (Eigen::Index k = 0; k < a.rows(); ++k) {
                    acc += net.layers[l].weights(r, k) * a(k, c);
                }
                z(r, c) = acc;
            }
        }
        if (l + 1 < net.layers.size()) {
            for (Eigen::Index c = 0; c < z.cols(); ++c) {
                for (Eigen::Index r = 0; r < z.rows(); ++r) {
                    if (z(r, c) < 0) z(r, c) *= net.leak;
                }
            }
        }
        a = z;
    }
    return a;
}

}  // namespace

TEST_CASE("forward of a zero-weight network returns the bias") {
    Rng rng = substream(200, "fwd-zero");
    Mlp net = make_mlp(3, {4}, 2, 0.03, rng);
    for (auto& layer : net.layers) layer.weights.setZero();
    net.layers[0].bias << 1.0, -2.0, 0.0, 3.0;
    net.layers[1].bias << 0.5, -0.5;
    Eigen::MatrixXd out = forward(net, random_matrix(3, 5, rng));
    for (int c = 0; c < 5; ++c) {
        // hidden = lrelu(bias), then output = W*hidden + bias = bias
        CHECK(out(0, c) == doctest::Approx(0.5));
        CHECK(out(1, c) == doctest::Approx(-0.5));
    }
}

TEST_CASE("single linear layer computes W x + b exactly") {
    Rng rng = substream(201, "fwd-lin");
    Mlp net = make_mlp(3, {}, 2, 0.03, rng);
    Eigen::MatrixXd x = random_matrix(3, 7, rng);
    Eigen::MatrixXd expected = (net.layers[0].weights * x).colwise() + net.layers[0].bias;
    CHECK((forward(net, x) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches a straight-line re-implementation") {
    Rng rng = substream(202, "fwd-naive");
    Mlp net = make_mlp(5, {7, 6}, 4, 0.03, rng);
    Eigen::MatrixXd x = random_matrix(5, 11, rng);
    CHECK((forward(net, x) - naive_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward rejects dimension mismatches") {
    Rng rng = substream(203, "fwd-dim");
    Mlp net = make_mlp(3, {4}, 2, 0.03, rng);
    CHECK_THROWS_AS(forward(net, Eigen::MatrixXd::Zero(4, 2)), std::invalid_argument);
}

TEST_CASE("backward of a linear layer under a sum loss gives batch-summed inputs") {
    Rng rng = substream(204, "bwd-lin");
    Mlp net = make_mlp(3, {}, 2, 0.03, rng);
    Eigen::MatrixXd x = random_matrix(3, 6, rng);
    ForwardCache cache;
    forward(net, x, &cache);
    MlpGrads grads = zero_grads(net);
    backward(net, cache, Eigen::MatrixXd::Ones(2, 6), grads);
    Eigen::VectorXd col_sum = x.rowwise().sum();
    for (int r = 0; r < 2; ++r) {
        CHECK((grads.layers[0].weights.row(r).transpose() - col_sum).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(grads.layers[0].bias[r] == doctest::Approx(6.0));
    }
}

TEST_CASE("leaky-ReLU backward scales by the slope at negative preactivations") {
    Rng rng = substream(205, "bwd-leak");
    Mlp net = make_mlp(1, {1}, 1, 0.03, rng);
    net.layers[0].weights << 1.0;
    net.layers[0].bias << 0.0;
    net.layers[1].weights << 1.0;
    net.layers[1].bias << 0.0;
    Eigen::MatrixXd x(1, 1);
    x << -2.0;  // negative preactivation in the hidden layer
    ForwardCache cache;
    forward(net, x, &cache);
    MlpGrads grads = zero_grads(net);
    Eigen::MatrixXd gin = backward(net, cache, Eigen::MatrixXd::Ones(1, 1), grads);
    CHECK(gin(0, 0) == doctest::Approx(0.03));
}

TEST_CASE("backward matches central finite differences over all parameters") {
    Rng rng = substream(206, "bwd-fd");
    Mlp net = make_mlp(4, {6, 5}, 3, 0.03, rng);
    Eigen::MatrixXd x = random_matrix(4, 10, rng);
    Eigen::MatrixXd target = random_matrix(3, 10, rng);

    auto loss = [&]() {
        Eigen::MatrixXd out = forward(net, x);
        return 0.5 * (out - target).squaredNorm();
    };
    auto grads = [&]() {
        ForwardCache cache;
        Eigen::MatrixXd out = forward(net, x, &cache);
        MlpGrads g = zero_grads(net);
        backward(net, cache, out - target, g);
        return flatten(g);
    };
    std::vector<ParamView> params = param_views(net, "net");
    Rng coords = substream(206, "bwd-coords");
    GradCheckResult result = gradcheck(loss, grads, params, 20, 1e-5, coords);
    CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("backward rejects a stale cache") {
    Rng rng = substream(207, "bwd-stale");
    Mlp net = make_mlp(3, {4}, 2, 0.03, rng);
    Mlp other = make_mlp(5, {4}, 2, 0.03, rng);
    ForwardCache cache;
    forward(other, random_matrix(5, 3, rng), &cache);
    MlpGrads grads = zero_grads(net);
    CHECK_THROWS_AS(backward(net, cache, Eigen::MatrixXd::Zero(2, 3), grads),
                    std::invalid_argument);
}

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
    Rng rng = substream(208, "adam-zero");
    Mlp net = make_mlp(2, {3}, 1, 0.03, rng);
    Mlp before = net;
    AdamState state = make_adam_state(net);
    adam_step(net, zero_grads(net), state);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(net.layers[l].weights == before.layers[l].weights);
        CHECK(net.layers[l].bias == before.layers[l].bias);
    }
}

TEST_CASE("adam step magnitude approaches lr under a constant gradient") {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    AdamVecState state = make_adam_state(theta, cfg);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(1, 0.7);
    double prev = theta[0];
    double step = 0.0;
    for (int i = 0; i < 500; ++i) {
        adam_step(theta, grad, state);
        step = prev - theta[0];
        prev = theta[0];
    }
    CHECK(step == doctest::Approx(cfg.lr).epsilon(1e-4));
}

TEST_CASE("adam minimizes a scalar quadratic to 1e-3 within 2000 steps") {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    AdamConfig cfg;
    cfg.lr = 0.1;
    AdamVecState state = make_adam_state(theta, cfg);
    for (int i = 0; i < 2000; ++i) {
        Eigen::VectorXd grad = Eigen::VectorXd::Constant(1, 2.0 * (theta[0] - 3.0));
        adam_step(theta, grad, state);
    }
    CHECK(std::abs(theta[0] - 3.0) < 1e-3);
}

TEST_CASE("adam rejects nonfinite gradients without touching parameters") {
    Rng rng = substream(209, "adam-nan");
    Mlp net = make_mlp(2, {}, 1, 0.03, rng);
    Mlp before = net;
    AdamState state = make_adam_state(net);
    MlpGrads grads = zero_grads(net);
    grads.layers[0].weights(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(net, grads, state), NumericalError);
    CHECK(net.layers[0].weights == before.layers[0].weights);
}

TEST_CASE("inject_noise with sigma 0 is the identity") {
    Rng rng = substream(210, "noise0");
    Eigen::MatrixXd x = random_matrix(3, 4, rng);
    Rng noise_rng = substream(210, "noise-stream");
    CHECK(inject_noise(x, 0.0, noise_rng) == x);
}

TEST_CASE("inject_noise empirical std is within 2% of sigma") {
    Rng rng = substream(211, "noise-std");
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(200, 500);
    Eigen::MatrixXd noisy = inject_noise(x, 0.5, rng);
    const double n = static_cast<double>(noisy.size());
    const double mean = noisy.sum() / n;
    const double sd = std::sqrt((noisy.array() - mean).square().sum() / (n - 1.0));
    CHECK(sd > 0.49);
    CHECK(sd < 0.51);
}

TEST_CASE("inject_noise is bit-identical for a fixed seed") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 6);
    Rng a = substream(212, "noise-det");
    Rng b = substream(212, "noise-det");
    CHECK(inject_noise(x, 0.5, a) == inject_noise(x, 0.5, b));
}

TEST_CASE("checkpoint round-trips the whole stack bit-exactly") {
    Rng rng = substream(213, "ckpt");
    StackSpec spec;
    spec.d_x = 5;
    spec.d_y = 4;
    spec.d_z = 3;
    spec.d_z_tilde = 2;
    spec.hidden = {6, 5};
    spec.use_autoencoder = true;
    spec.use_private = true;
    EncoderStack stack = make_encoder_stack(spec, rng);
    stack.log_kde_sigma << 0.1, -0.2, 0.3;

    auto dir = std::filesystem::temp_directory_path() / "transience_mlp_test";
    std::filesystem::create_directories(dir);
    write_checkpoint(dir / "model.ckpt", stack);
    EncoderStack back = read_checkpoint(dir / "model.ckpt");

    CHECK(back.use_autoencoder == stack.use_autoencoder);
    CHECK(back.use_private == stack.use_private);
    CHECK(back.d_z == stack.d_z);
    CHECK(back.d_z_tilde == stack.d_z_tilde);
    CHECK(back.log_kde_sigma == stack.log_kde_sigma);
    for (std::size_t l = 0; l < stack.encoder_x.layers.size(); ++l) {
        CHECK(back.encoder_x.layers[l].weights == stack.encoder_x.layers[l].weights);
        CHECK(back.encoder_x.layers[l].bias == stack.encoder_x.layers[l].bias);
        CHECK(back.decoder_y.layers[l].weights == stack.decoder_y.layers[l].weights);
    }
}

TEST_CASE("encoder stack without private variables sizes decoders from d_z") {
    Rng rng = substream(214, "stack-dims");
    StackSpec spec;
    spec.d_x = 5;
    spec.d_y = 4;
    spec.d_z = 3;
    spec.d_z_tilde = 2;
    spec.hidden = {6};
    spec.use_autoencoder = true;
    EncoderStack stack = make_encoder_stack(spec, rng);
    CHECK(stack.decoder_x.input_dim() == 3);
    spec.use_private = true;
    EncoderStack with_priv = make_encoder_stack(spec, rng);
    CHECK(with_priv.decoder_x.input_dim() == 5);
}

TEST_CASE("gradcheck on a quadratic loss is exact to roundoff") {
    Rng rng = substream(215, "gc-quad");
    Eigen::MatrixXd theta = random_matrix(3, 4, rng);
    std::vector<ParamView> params{{"theta", theta.data(), theta.size()}};
    auto value = [&]() { return 0.5 * theta.squaredNorm(); };
    auto grads = [&]() {
        return std::vector<Eigen::VectorXd>{
            Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size())};
    };
    Rng coords = substream(215, "gc-coords");
    // truncation vanishes for quadratics, so a large step leaves only roundoff
    GradCheckResult result = gradcheck(value, grads, params, 20, 5e-2, coords);
    CHECK(result.max_rel_error < 1e-9);
}

TEST_CASE("gradcheck flags nonfinite losses") {
    Eigen::MatrixXd theta = Eigen::MatrixXd::Ones(1, 1);
    std::vector<ParamView> params{{"theta", theta.data(), 1}};
    auto value = [&]() { return std::log(theta(0, 0) - 1.0); };  // -inf at the base point
    auto grads = [&]() { return std::vector<Eigen::VectorXd>{Eigen::VectorXd::Ones(1)}; };
    Rng coords = substream(216, "gc-coords");
    CHECK_THROWS_AS(gradcheck(value, grads, params, 5, 1e-5, coords), NumericalError);
}

TEST_CASE("training determinism: same seed, same weights after updates") {
    auto run = [](std::uint64_t seed) {
        Rng rng = substream(seed, "det");
        Mlp net = make_mlp(3, {4}, 2, 0.03, rng);
        AdamState state = make_adam_state(net);
        Eigen::MatrixXd x = random_matrix(3, 8, rng);
        Eigen::MatrixXd t = random_matrix(2, 8, rng);
        for (int i = 0; i < 20; ++i) {
            ForwardCache cache;
            Eigen::MatrixXd out = forward(net, x, &cache);
            MlpGrads g = zero_grads(net);
            backward(net, cache, out - t, g);
            adam_step(net, g, state);
        }
        return net;
    };
    Mlp a = run(77);
    Mlp b = run(77);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].weights == b.layers[l].weights);
    }
}
