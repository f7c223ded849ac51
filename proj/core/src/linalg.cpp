#include "transience/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "transience/errors.hpp"

namespace transience {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           double regularizer) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("covariance: views must share the sample count");
    }
    const auto n = a.cols();
    if (n < 2) {
        throw std::invalid_argument("covariance: need at least 2 samples");
    }
    if (regularizer < 0.0) {
        throw std::invalid_argument("covariance: regularizer must be nonnegative");
    }
    Eigen::MatrixXd ac = a.colwise() - a.rowwise().mean().eval();
    Eigen::MatrixXd bc = b.colwise() - b.rowwise().mean().eval();
    Eigen::MatrixXd cov = (ac * bc.transpose()) / static_cast<double>(n - 1);
    if (regularizer > 0.0) {
        if (cov.rows() != cov.cols()) {
            throw std::invalid_argument("covariance: regularizer requires a square (same-view) result");
        }
        cov.diagonal().array() += regularizer;
    }
    return cov;
}

SymmetricEigen sym_eig(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("sym_eig: matrix must be square");
    }
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("sym_eig: eigendecomposition did not converge");
    }
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd& m, double floor) {
    if (floor <= 0.0) {
        throw std::invalid_argument("inv_sqrt_psd: floor must be positive");
    }
    SymmetricEigen eig = sym_eig(m);
    if (eig.eigenvalues.minCoeff() < -1e-8) {
        throw NotPsdError("inv_sqrt_psd: matrix has eigenvalue below -1e-8");
    }
    Eigen::VectorXd inv_sqrt = eig.eigenvalues.array().max(floor).rsqrt();
    return eig.eigenvectors * inv_sqrt.asDiagonal() * eig.eigenvectors.transpose();
}

}  // namespace transience
