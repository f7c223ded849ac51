#include "transience/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace transience {

std::string to_string(DtwMetric m) {
    return m == DtwMetric::cosine ? "cosine" : "euclidean";
}

DtwMetric dtw_metric_from_string(const std::string& s) {
    if (s == "cosine") return DtwMetric::cosine;
    if (s == "euclidean") return DtwMetric::euclidean;
    throw std::invalid_argument("unknown dtw metric: " + s);
}

Eigen::MatrixXd pairwise_distance(const Eigen::MatrixXd& zx, const Eigen::MatrixXd& zy,
                                  DtwMetric metric) {
    if (zx.rows() != zy.rows()) {
        throw std::invalid_argument("pairwise_distance: latent dims must match");
    }
    const auto tx = zx.cols();
    const auto ty = zy.cols();
    Eigen::MatrixXd dist(tx, ty);
    if (metric == DtwMetric::cosine) {
        Eigen::VectorXd nx = zx.colwise().norm();
        Eigen::VectorXd ny = zy.colwise().norm();
        Eigen::MatrixXd dots = zx.transpose() * zy;
        for (Eigen::Index i = 0; i < tx; ++i) {
            for (Eigen::Index j = 0; j < ty; ++j) {
                // clamp: identical vectors can round to 1 - (1 + eps) < 0
                dist(i, j) = std::max(0.0, 1.0 - dots(i, j) / std::max(nx[i] * ny[j], 1e-12));
            }
        }
    } else {
        for (Eigen::Index i = 0; i < tx; ++i) {
            for (Eigen::Index j = 0; j < ty; ++j) {
                dist(i, j) = (zx.col(i) - zy.col(j)).norm();
            }
        }
    }
    return dist;
}

DtwResult dtw(const Eigen::MatrixXd& cost, bool keep_matrix) {
    const auto tx = cost.rows();
    const auto ty = cost.cols();
    if (tx == 0 || ty == 0) {
        throw std::invalid_argument("dtw: cost matrix must be nonempty");
    }
    if (!cost.allFinite() || cost.minCoeff() < 0.0) {
        throw std::invalid_argument("dtw: cost matrix must be finite and nonnegative");
    }

    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd acc(tx, ty);
    acc(0, 0) = cost(0, 0);
    for (Eigen::Index i = 1; i < tx; ++i) acc(i, 0) = acc(i - 1, 0) + cost(i, 0);
    for (Eigen::Index j = 1; j < ty; ++j) acc(0, j) = acc(0, j - 1) + cost(0, j);
    for (Eigen::Index i = 1; i < tx; ++i) {
        for (Eigen::Index j = 1; j < ty; ++j) {
            acc(i, j) = cost(i, j) + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
        }
    }

    DtwResult result;
    result.total_cost = acc(tx - 1, ty - 1);

    // Backtrace; ties prefer diagonal, then advancing x, then advancing y.
    std::vector<int> rev_x, rev_y;
    Eigen::Index i = tx - 1, j = ty - 1;
    rev_x.push_back(static_cast<int>(i) + 1);
    rev_y.push_back(static_cast<int>(j) + 1);
    while (i > 0 || j > 0) {
        double diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : inf;
        double up = (i > 0) ? acc(i - 1, j) : inf;
        double left = (j > 0) ? acc(i, j - 1) : inf;
        if (diag <= up && diag <= left) {
            --i; --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
        rev_x.push_back(static_cast<int>(i) + 1);
        rev_y.push_back(static_cast<int>(j) + 1);
    }
    result.path.phi_x.assign(rev_x.rbegin(), rev_x.rend());
    result.path.phi_y.assign(rev_y.rbegin(), rev_y.rend());
    if (keep_matrix) result.accumulated = std::move(acc);
    return result;
}

namespace {

void enumerate_paths(const Eigen::MatrixXd& cost, Eigen::Index i, Eigen::Index j,
                     double running, std::vector<int>& px, std::vector<int>& py,
                     DtwResult& best) {
    running += cost(i, j);
    px.push_back(static_cast<int>(i) + 1);
    py.push_back(static_cast<int>(j) + 1);
    if (i == cost.rows() - 1 && j == cost.cols() - 1) {
        if (running < best.total_cost) {
            best.total_cost = running;
            best.path.phi_x = px;
            best.path.phi_y = py;
        }
    } else {
        if (i + 1 < cost.rows() && j + 1 < cost.cols()) {
            enumerate_paths(cost, i + 1, j + 1, running, px, py, best);
        }
        if (i + 1 < cost.rows()) {
            enumerate_paths(cost, i + 1, j, running, px, py, best);
        }
        if (j + 1 < cost.cols()) {
            enumerate_paths(cost, i, j + 1, running, px, py, best);
        }
    }
    px.pop_back();
    py.pop_back();
}

}  // namespace

DtwResult brute_force_dtw(const Eigen::MatrixXd& cost) {
    const auto tx = cost.rows();
    const auto ty = cost.cols();
    if (tx == 0 || ty == 0) {
        throw std::invalid_argument("brute_force_dtw: cost matrix must be nonempty");
    }
    if (tx > 8 || ty > 8) {
        throw std::invalid_argument("brute_force_dtw: limited to 8x8 matrices");
    }
    DtwResult best;
    best.total_cost = std::numeric_limits<double>::infinity();
    std::vector<int> px, py;
    enumerate_paths(cost, 0, 0, 0.0, px, py, best);
    return best;
}

double path_cost(const Eigen::MatrixXd& cost, const WarpingPathPair& path) {
    double total = 0.0;
    for (int t = 0; t < path.length(); ++t) {
        total += cost(path.phi_x[t] - 1, path.phi_y[t] - 1);
    }
    return total;
}

}  // namespace transience
