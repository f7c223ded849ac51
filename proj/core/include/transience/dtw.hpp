#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "transience/sequence.hpp"

namespace transience {

enum class DtwMetric { cosine, euclidean };

std::string to_string(DtwMetric m);
DtwMetric dtw_metric_from_string(const std::string& s);

/// T_x x T_y matrix of frame distances between the columns of two latent
/// blocks. Cosine: 1 - u.v / max(|u||v|, 1e-12); euclidean: |u - v|_2.
Eigen::MatrixXd pairwise_distance(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                                  DtwMetric metric);

struct DtwResult {
    WarpingPathPair path;
    double total_cost = 0.0;
    std::optional<Eigen::MatrixXd> accumulated;  // DP matrix, kept on request
};

/// Globally minimal-cost monotone path under steps {(0,1),(1,0),(1,1)} from
/// (1,1) to (T_x,T_y); every visited cell contributes its entry to the cost.
/// Backtrace ties prefer the diagonal, then the x-advance, then the y-advance.
DtwResult dtw(const Eigen::MatrixXd& cost, bool keep_matrix = false);

/// Exhaustive enumeration of all monotone boundary-respecting paths; the
/// testing oracle for dtw(). Limited to 8x8 matrices.
DtwResult brute_force_dtw(const Eigen::MatrixXd& cost);

/// Sum of cost-matrix entries along a path (for recomputing DtwResult costs).
double path_cost(const Eigen::MatrixXd& cost, const WarpingPathPair& path);

}  // namespace transience
