#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>

#include "transience/errors.hpp"
#include "transience/linalg.hpp"
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

Eigen::MatrixXd random_psd(int d, double min_eig, double max_eig, Rng& rng) {
    Eigen::MatrixXd a = random_matrix(d, d, rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd eigs(d);
    for (int i = 0; i < d; ++i) {
        eigs[i] = min_eig + (max_eig - min_eig) * uniform01(rng);
    }
    eigs[0] = min_eig;
    eigs[d - 1] = max_eig;
    return q * eigs.asDiagonal() * q.transpose();
}

}  // namespace

TEST_CASE("covariance of a repeated sample is the regularizer alone") {
    Eigen::MatrixXd a(2, 4);
    a.col(0) << 1.0, -2.0;
    for (int i = 1; i < 4; ++i) a.col(i) = a.col(0);
    Eigen::MatrixXd cov = covariance(a, a, 0.5);
    CHECK((cov - 0.5 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("covariance hand case: 1-D views of 2 samples") {
    // (1/(N-1)) sum of centered products: samples already zero-mean, so
    // (1*2 + (-1)*(-2)) / 1 = 4
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 1, -1;
    b << 2, -2;
    Eigen::MatrixXd cov = covariance(a, b);
    CHECK(cov.rows() == 1);
    CHECK(cov(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("cross-covariance of independent unit-variance samples vanishes") {
    Rng rng = substream(100, "cov-indep");
    const int n = 50000;
    Eigen::MatrixXd a = random_matrix(3, n, rng);
    Eigen::MatrixXd b = random_matrix(4, n, rng);
    Eigen::MatrixXd cov = covariance(a, b);
    CHECK(cov.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("covariance(A, A) is symmetric PSD") {
    Rng rng = substream(101, "cov-psd");
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd a = random_matrix(4, 12, rng);
        Eigen::MatrixXd cov = covariance(a, a);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        SymmetricEigen eig = sym_eig(cov);
        CHECK(eig.eigenvalues.minCoeff() > -1e-10);
    }
}

TEST_CASE("covariance rejects tiny batches and mismatched sample counts") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(covariance(a, a), std::invalid_argument);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 3);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 4);
    CHECK_THROWS_AS(covariance(b, c), std::invalid_argument);
    // regularizer on a non-square cross-covariance is a caller bug
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 4);
    CHECK_THROWS_AS(covariance(b.topRows(2), d, 0.1), std::invalid_argument);
}

TEST_CASE("sym_eig of the identity") {
    SymmetricEigen eig = sym_eig(Eigen::MatrixXd::Identity(3, 3));
    CHECK((eig.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-14);
}

TEST_CASE("sym_eig of diag(3,1) sorts ascending with axis eigenvectors") {
    Eigen::MatrixXd m = Eigen::Vector2d{3.0, 1.0}.asDiagonal();
    SymmetricEigen eig = sym_eig(m);
    CHECK(eig.eigenvalues[0] == doctest::Approx(1.0));
    CHECK(eig.eigenvalues[1] == doctest::Approx(3.0));
    CHECK(std::abs(eig.eigenvectors(1, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(eig.eigenvectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
    Rng rng = substream(102, "eig-recon");
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd a = random_matrix(8, 8, rng);
        Eigen::MatrixXd m = 0.5 * (a + a.transpose());
        SymmetricEigen eig = sym_eig(m);
        Eigen::MatrixXd rec =
            eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.transpose();
        CHECK((rec - m).norm() < 1e-8 * std::max(1.0, m.norm()));
        Eigen::MatrixXd vtv = eig.eigenvectors.transpose() * eig.eigenvectors;
        CHECK((vtv - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-8);
        for (int i = 1; i < 8; ++i) CHECK(eig.eigenvalues[i] >= eig.eigenvalues[i - 1]);
    }
}

TEST_CASE("sym_eig eigenvalues of M^T M are nonnegative") {
    Rng rng = substream(103, "eig-psd");
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd m = random_matrix(6, 6, rng);
        SymmetricEigen eig = sym_eig(m.transpose() * m);
        CHECK(eig.eigenvalues.minCoeff() > -1e-10 * std::max(1.0, m.squaredNorm()));
    }
}

TEST_CASE("sym_eig rejects non-square input") {
    CHECK_THROWS_AS(sym_eig(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("inv_sqrt_psd identity and diagonal cases") {
    CHECK((inv_sqrt_psd(Eigen::MatrixXd::Identity(3, 3)) - Eigen::MatrixXd::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    Eigen::MatrixXd m = Eigen::Vector2d{4.0, 9.0}.asDiagonal();
    Eigen::MatrixXd r = inv_sqrt_psd(m);
    CHECK(r(0, 0) == doctest::Approx(0.5));
    CHECK(r(1, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(std::abs(r(0, 1)) < 1e-14);
}

TEST_CASE("inv_sqrt_psd self-consistency on random PSD matrices") {
    Rng rng = substream(104, "isqrt");
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd m = random_psd(6, 0.2, 3.0, rng);
        Eigen::MatrixXd r = inv_sqrt_psd(m, 1e-6);
        CHECK((r - r.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((r * m * r - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("inv_sqrt_psd squared times M is the identity up to conditioning") {
    Rng rng = substream(105, "isqrt-cond");
    for (double min_eig : {1e-2, 1e-4, 1e-6}) {
        Eigen::MatrixXd m = random_psd(5, min_eig, 1.0, rng);
        const double cond = 1.0 / min_eig;
        Eigen::MatrixXd r = inv_sqrt_psd(m, 1e-9);
        const double resid = (r * r * m - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff();
        CHECK(resid < 1e-10 * cond + 1e-9);
    }
}

TEST_CASE("inv_sqrt_psd rejects indefinite matrices") {
    Eigen::MatrixXd m = Eigen::Vector2d{1.0, -0.5}.asDiagonal();
    CHECK_THROWS_AS(inv_sqrt_psd(m), NotPsdError);
}

TEST_CASE("inv_sqrt_psd floors tiny eigenvalues instead of exploding") {
    Eigen::MatrixXd m = Eigen::Vector2d{1.0, 0.0}.asDiagonal();
    Eigen::MatrixXd r = inv_sqrt_psd(m, 1e-6);
    CHECK(r(1, 1) == doctest::Approx(1.0 / std::sqrt(1e-6)));
}
