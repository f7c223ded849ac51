#include "transience/sequence.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "transience/linalg.hpp"
#include "transience/textio.hpp"

namespace transience {

std::string format_double(double value) {
    char buf[32];
    // %.17g always round-trips; try shorter forms first so files stay small.
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
        if (std::strtod(buf, nullptr) == value) break;
    }
    return buf;
}

FeatureSequence make_sequence(Eigen::MatrixXd data) {
    FeatureSequence seq{std::move(data)};
    validate(seq);
    return seq;
}

void validate(const FeatureSequence& seq) {
    if (seq.data.rows() < 1 || seq.data.cols() < 1) {
        throw std::invalid_argument("FeatureSequence: dim and length must be >= 1");
    }
    if (!seq.data.allFinite()) {
        throw std::invalid_argument("FeatureSequence: entries must be finite");
    }
}

void validate(const WarpingPathPair& path, int t_x, int t_y) {
    const int t = path.length();
    if (t < 1 || static_cast<int>(path.phi_y.size()) != t) {
        throw std::invalid_argument("WarpingPathPair: index sequences must be nonempty and equal length");
    }
    if (path.phi_x.front() != 1 || path.phi_y.front() != 1) {
        throw std::invalid_argument("WarpingPathPair: path must start at (1,1)");
    }
    if (path.phi_x.back() != t_x || path.phi_y.back() != t_y) {
        throw std::invalid_argument("WarpingPathPair: path must end at (T_x, T_y)");
    }
    for (int i = 1; i < t; ++i) {
        const int dx = path.phi_x[i] - path.phi_x[i - 1];
        const int dy = path.phi_y[i] - path.phi_y[i - 1];
        const bool ok = (dx == 0 && dy == 1) || (dx == 1 && dy == 0) || (dx == 1 && dy == 1);
        if (!ok) {
            throw std::invalid_argument("WarpingPathPair: step must be in {(0,1),(1,0),(1,1)}");
        }
    }
}

namespace {

// 1 + ceil((t-1)/(T-1) * (side-1)) in exact integer arithmetic.
int uniform_index(int t, int common_len, int side_len) {
    const long long num = static_cast<long long>(t - 1) * (side_len - 1);
    const long long den = common_len - 1;
    return 1 + static_cast<int>((num + den - 1) / den);
}

}  // namespace

WarpingPathPair uniform_init_path(int t_x, int t_y) {
    if (t_x < 1 || t_y < 1) {
        throw std::invalid_argument("uniform_init_path: lengths must be positive");
    }
    const int t = std::max(t_x, t_y);
    WarpingPathPair path;
    path.phi_x.reserve(t);
    path.phi_y.reserve(t);
    if (t == 1) {
        path.phi_x.push_back(1);
        path.phi_y.push_back(1);
        return path;
    }
    for (int i = 1; i <= t; ++i) {
        path.phi_x.push_back(uniform_index(i, t, t_x));
        path.phi_y.push_back(uniform_index(i, t, t_y));
    }
    return path;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gather_aligned(
    const FeatureSequence& x, const FeatureSequence& y, const WarpingPathPair& path) {
    const int t = path.length();
    Eigen::MatrixXd gx(x.dim(), t);
    Eigen::MatrixXd gy(y.dim(), t);
    for (int i = 0; i < t; ++i) {
        const int ix = path.phi_x[i];
        const int iy = path.phi_y[i];
        if (ix < 1 || ix > x.length() || iy < 1 || iy > y.length()) {
            throw std::invalid_argument("gather_aligned: path index out of range");
        }
        gx.col(i) = x.data.col(ix - 1);
        gy.col(i) = y.data.col(iy - 1);
    }
    return {std::move(gx), std::move(gy)};
}

FeatureSequence add_deltas(const FeatureSequence& x) {
    validate(x);
    const int d = x.dim();
    const int t = x.length();
    auto at = [&](int i) { return x.data.col(std::clamp(i, 0, t - 1)); };
    Eigen::MatrixXd out(3 * d, t);
    for (int i = 0; i < t; ++i) {
        out.block(0, i, d, 1) = x.data.col(i);
        out.block(d, i, d, 1) = 0.5 * (at(i + 1) - at(i - 1));
        out.block(2 * d, i, d, 1) = at(i + 1) - 2.0 * x.data.col(i) + at(i - 1);
    }
    return {std::move(out)};
}

std::pair<FeatureSequence, Standardization> zscore_fit_apply(const FeatureSequence& x) {
    validate(x);
    const int t = x.length();
    if (t < 2) {
        throw std::invalid_argument("zscore_fit_apply: need length >= 2");
    }
    Standardization s;
    s.mean = x.data.rowwise().mean();
    Eigen::MatrixXd centered = x.data.colwise() - s.mean;
    Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(t - 1);
    s.std = var.array().sqrt();
    for (int i = 0; i < s.std.size(); ++i) {
        if (s.std[i] < 1e-12) s.std[i] = 1.0;  // constant dimension: center only
    }
    FeatureSequence out{centered.array().colwise() / s.std.array()};
    return {std::move(out), std::move(s)};
}

Eigen::MatrixXd apply_standardization(const Standardization& s, const Eigen::MatrixXd& x) {
    return (x.colwise() - s.mean).array().colwise() / s.std.array();
}

FeatureSequence context_window(const FeatureSequence& x, int width) {
    validate(x);
    if (width < 1 || width % 2 == 0) {
        throw std::invalid_argument("context_window: width must be odd and positive");
    }
    const int d = x.dim();
    const int t = x.length();
    const int half = (width - 1) / 2;
    Eigen::MatrixXd out(width * d, t);
    for (int i = 0; i < t; ++i) {
        for (int w = -half; w <= half; ++w) {
            const int src = std::clamp(i + w, 0, t - 1);
            out.block((w + half) * d, i, d, 1) = x.data.col(src);
        }
    }
    return {std::move(out)};
}

PcaModel pca_fit(const Eigen::MatrixXd& samples, int retained) {
    const int d = static_cast<int>(samples.rows());
    const auto n = samples.cols();
    if (n < 2) {
        throw std::invalid_argument("pca_fit: need at least 2 samples");
    }
    const int bound = std::min<int>(static_cast<int>(n) - 1, d);
    if (retained < 1 || retained > bound) {
        throw std::invalid_argument("pca_fit: retained must be in [1, min(samples-1, dim)]");
    }
    PcaModel model;
    model.mean = samples.rowwise().mean();
    SymmetricEigen eig = sym_eig(covariance(samples, samples));
    // eigenvalues ascending; take the top `retained` in decreasing order
    model.basis.resize(retained, d);
    for (int i = 0; i < retained; ++i) {
        model.basis.row(i) = eig.eigenvectors.col(d - 1 - i).transpose();
    }
    model.retained = retained;
    return model;
}

Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& x) {
    if (x.rows() != model.mean.size()) {
        throw std::invalid_argument("pca_apply: input dim does not match model");
    }
    return model.basis * (x.colwise() - model.mean);
}

void write_sequence(const std::filesystem::path& file, const FeatureSequence& seq) {
    validate(seq);
    std::ofstream out(file);
    if (!out) {
        throw std::invalid_argument("write_sequence: cannot open " + file.string());
    }
    out << "dim=" << seq.dim() << " len=" << seq.length() << "\n";
    for (int t = 0; t < seq.length(); ++t) {
        for (int i = 0; i < seq.dim(); ++i) {
            if (i > 0) out << ' ';
            out << format_double(seq.data(i, t));
        }
        out << "\n";
    }
}

FeatureSequence read_sequence(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw std::invalid_argument("read_sequence: cannot open " + file.string());
    }
    std::string header;
    std::getline(in, header);
    int d = 0, t = 0;
    if (std::sscanf(header.c_str(), "dim=%d len=%d", &d, &t) != 2 || d < 1 || t < 1) {
        throw std::invalid_argument("read_sequence: bad header in " + file.string());
    }
    Eigen::MatrixXd data(d, t);
    std::string line;
    for (int col = 0; col < t; ++col) {
        if (!std::getline(in, line)) {
            throw std::invalid_argument("read_sequence: truncated file " + file.string());
        }
        std::istringstream row(line);
        for (int i = 0; i < d; ++i) {
            if (!(row >> data(i, col))) {
                throw std::invalid_argument("read_sequence: malformed row in " + file.string());
            }
        }
    }
    return make_sequence(std::move(data));
}

void write_path_csv(const std::filesystem::path& file, const WarpingPathPair& path) {
    std::ofstream out(file);
    if (!out) {
        throw std::invalid_argument("write_path_csv: cannot open " + file.string());
    }
    out << "t,phi_x,phi_y\n";
    for (int i = 0; i < path.length(); ++i) {
        out << i << ',' << path.phi_x[i] - 1 << ',' << path.phi_y[i] - 1 << "\n";
    }
}

WarpingPathPair read_path_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw std::invalid_argument("read_path_csv: cannot open " + file.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "t,phi_x,phi_y") {
        throw std::invalid_argument("read_path_csv: bad header in " + file.string());
    }
    WarpingPathPair path;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int t = 0, px = 0, py = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%d", &t, &px, &py) != 3) {
            throw std::invalid_argument("read_path_csv: malformed row in " + file.string());
        }
        path.phi_x.push_back(px + 1);
        path.phi_y.push_back(py + 1);
    }
    if (path.phi_x.empty()) {
        throw std::invalid_argument("read_path_csv: empty path in " + file.string());
    }
    return path;
}

}  // namespace transience
