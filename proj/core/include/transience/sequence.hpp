#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <utility>
#include <vector>

namespace transience {

/// A d x T block of per-frame feature vectors (one column per frame).
struct FeatureSequence {
    Eigen::MatrixXd data;

    int dim() const { return static_cast<int>(data.rows()); }
    int length() const { return static_cast<int>(data.cols()); }
};

/// Validates dims >= 1 and finite entries; returns the sequence.
FeatureSequence make_sequence(Eigen::MatrixXd data);
void validate(const FeatureSequence& seq);

/// A pair of warping functions (phi_x, phi_y) of common length T mapping a
/// shared time axis into two sequences. Indices are 1-based; serialization
/// uses 0-based indices.
struct WarpingPathPair {
    std::vector<int> phi_x;
    std::vector<int> phi_y;

    int length() const { return static_cast<int>(phi_x.size()); }
};

/// Checks boundary conditions (1,1) -> (t_x, t_y) and the step set
/// {(0,1), (1,0), (1,1)}; throws std::invalid_argument on violation.
void validate(const WarpingPathPair& path, int t_x, int t_y);

/// Uniform alignment: phi_t = 1 + ceil((t-1)/(T-1) * (T_side - 1)) with
/// T = max(t_x, t_y); the single pair (1,1) when T = 1.
WarpingPathPair uniform_init_path(int t_x, int t_y);

/// Materializes the aligned frame pairs: column t of the outputs is
/// X[:, phi_x[t]] and Y[:, phi_y[t]].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gather_aligned(
    const FeatureSequence& x, const FeatureSequence& y, const WarpingPathPair& path);

/// Stacks static, delta ([-1,0,1]/2) and acceleration ([1,-2,1]) features
/// with replicated-edge padding; output dim is 3*d.
FeatureSequence add_deltas(const FeatureSequence& x);

struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // 1.0 where the variance floor (1e-12) kicked in
};

/// Per-dimension z-scoring. Dimensions with std below 1e-12 are centered but
/// not scaled. Requires length >= 2.
std::pair<FeatureSequence, Standardization> zscore_fit_apply(const FeatureSequence& x);

Eigen::MatrixXd apply_standardization(const Standardization& s, const Eigen::MatrixXd& x);

/// Column t stacks frames t-(w-1)/2 ... t+(w-1)/2 (edges replicated).
/// Width must be odd.
FeatureSequence context_window(const FeatureSequence& x, int width);

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;  // retained x input-dim, rows orthonormal
    int retained = 0;
};

/// Fits PCA on samples (columns). Basis rows are the top eigenvectors of the
/// sample covariance in decreasing eigenvalue order.
/// Requires retained <= min(sample count - 1, input dim).
PcaModel pca_fit(const Eigen::MatrixXd& samples, int retained);
Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& x);

// --- file formats ---
// Sequence file: header line "dim=<d> len=<T>" then T lines of d floats.
// Path CSV: header "t,phi_x,phi_y" then 0-based rows.

void write_sequence(const std::filesystem::path& file, const FeatureSequence& seq);
FeatureSequence read_sequence(const std::filesystem::path& file);

void write_path_csv(const std::filesystem::path& file, const WarpingPathPair& path);
WarpingPathPair read_path_csv(const std::filesystem::path& file);

}  // namespace transience
