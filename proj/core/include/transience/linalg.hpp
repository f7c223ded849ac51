#pragma once

#include <Eigen/Dense>

namespace transience {

/// Eigendecomposition of a symmetric matrix. Eigenvalues ascending,
/// eigenvectors stored as columns, V diag(lambda) V^T reconstructs the input.
struct SymmetricEigen {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

/// Sample covariance (1/(N-1)) (A - mean_A)(B - mean_B)^T of two views with a
/// shared sample axis (columns). `regularizer`, when positive, is added to the
/// diagonal; callers pass it for same-view covariances only and must leave it
/// at 0 for cross-covariances.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           double regularizer = 0.0);

/// Symmetric eigendecomposition. The input is symmetrized as (M + M^T)/2
/// before factorization; non-square input throws std::invalid_argument.
SymmetricEigen sym_eig(const Eigen::MatrixXd& m);

/// M^{-1/2} for symmetric PSD M: V diag(max(lambda, floor))^{-1/2} V^T.
/// Eigenvalues below -1e-8 throw NotPsdError.
Eigen::MatrixXd inv_sqrt_psd(const Eigen::MatrixXd& m, double floor = 1e-6);

}  // namespace transience
