#include "transience/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace transience {

void validate(const SynthSpec& spec) {
    if (spec.d_x < 1 || spec.d_y < 1 || spec.latent_dim < 1) {
        throw std::invalid_argument("SynthSpec: dims must be positive (d_x, d_y, latent_dim)");
    }
    if (spec.latent_dim > std::min(spec.d_x, spec.d_y)) {
        throw std::invalid_argument("SynthSpec: latent_dim must be <= min(d_x, d_y)");
    }
    if (spec.t_x < 2 || spec.t_y < 2) {
        throw std::invalid_argument("SynthSpec: lengths must be >= 2 (t_x, t_y)");
    }
    if (spec.noise_std < 0.0) {
        throw std::invalid_argument("SynthSpec: noise_std must be >= 0");
    }
    if (spec.warp_jitter < 0.0 || spec.warp_jitter >= 1.0) {
        throw std::invalid_argument("SynthSpec: warp_jitter must be in [0, 1)");
    }
    if (spec.smoothness <= 0.0) {
        throw std::invalid_argument("SynthSpec: smoothness must be positive");
    }
}

Eigen::MatrixXd gen_latent(int t, int k, double smoothness, Rng& rng) {
    if (t < 2) throw std::invalid_argument("gen_latent: need t >= 2");
    if (k < 1) throw std::invalid_argument("gen_latent: need k >= 1");

    // cumulative Gaussian walk
    Eigen::MatrixXd walk(k, t);
    for (int d = 0; d < k; ++d) {
        double acc = 0.0;
        for (int i = 0; i < t; ++i) {
            acc += gaussian(rng);
            walk(d, i) = acc;
        }
    }

    // truncated, renormalized Gaussian smoothing window
    const int radius = std::min(t - 1, std::max(1, static_cast<int>(std::ceil(4.0 * smoothness))));
    Eigen::VectorXd kernel(2 * radius + 1);
    for (int w = -radius; w <= radius; ++w) {
        kernel[w + radius] = std::exp(-0.5 * (w / smoothness) * (w / smoothness));
    }
    Eigen::MatrixXd smooth(k, t);
    for (int i = 0; i < t; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(t - 1, i + radius);
        double wsum = 0.0;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(k);
        for (int j = lo; j <= hi; ++j) {
            const double w = kernel[j - i + radius];
            acc += w * walk.col(j);
            wsum += w;
        }
        smooth.col(i) = acc / wsum;
    }

    // z-score per dimension (sample std)
    Eigen::VectorXd mean = smooth.rowwise().mean();
    smooth.colwise() -= mean;
    Eigen::VectorXd sd = (smooth.array().square().rowwise().sum() / (t - 1)).sqrt();
    for (int d = 0; d < k; ++d) {
        if (sd[d] < 1e-12) sd[d] = 1.0;
    }
    return smooth.array().colwise() / sd.array();
}

std::vector<int> gen_warp(int t_x, int t_y, double jitter, Rng& rng) {
    if (t_x < 2 || t_y < 2) {
        throw std::invalid_argument("gen_warp: lengths must be >= 2");
    }
    if (jitter < 0.0 || jitter >= 1.0) {
        throw std::invalid_argument("gen_warp: jitter must be in [0, 1)");
    }
    std::vector<double> cum(t_y);
    double acc = 0.0;
    for (int s = 0; s < t_y; ++s) {
        acc += 1.0 - jitter + 2.0 * jitter * uniform01(rng);
        cum[s] = acc;
    }
    const double span = cum[t_y - 1] - cum[0];
    std::vector<int> map(t_y);
    for (int s = 0; s < t_y; ++s) {
        // 1 + ceil(fraction * (t_x - 1)); exact for jitter 0 where the
        // fraction is a ratio of integers
        map[s] = 1 + static_cast<int>(std::ceil((cum[s] - cum[0]) * (t_x - 1) / span - 1e-12));
    }
    map[0] = 1;
    map[t_y - 1] = t_x;
    for (int s = 1; s < t_y; ++s) {
        if (map[s] < map[s - 1]) map[s] = map[s - 1];  // guard fp non-monotonicity
    }
    return map;
}

SynthMaps draw_maps(const SynthSpec& spec, Rng& rng) {
    validate(spec);
    // argument std ~2 puts tanh well into its nonlinear range
    const double scale = 3.0 / std::sqrt(static_cast<double>(spec.latent_dim));
    SynthMaps maps;
    maps.a_x.resize(spec.d_x, spec.latent_dim);
    for (int r = 0; r < spec.d_x; ++r)
        for (int c = 0; c < spec.latent_dim; ++c) maps.a_x(r, c) = scale * gaussian(rng);
    maps.b_x.resize(spec.d_x);
    for (int r = 0; r < spec.d_x; ++r) maps.b_x[r] = 0.1 * gaussian(rng);
    maps.a_y.resize(spec.d_y, spec.latent_dim);
    for (int r = 0; r < spec.d_y; ++r)
        for (int c = 0; c < spec.latent_dim; ++c) maps.a_y(r, c) = scale * gaussian(rng);
    maps.b_y.resize(spec.d_y);
    for (int r = 0; r < spec.d_y; ++r) maps.b_y[r] = 0.1 * gaussian(rng);
    return maps;
}

SynthPair gen_pair(const SynthSpec& spec, std::uint64_t seed, const SynthMaps* maps) {
    validate(spec);
    Rng rng = substream(seed, "synth-pair");

    Eigen::MatrixXd latent = gen_latent(spec.t_x, spec.latent_dim, spec.smoothness, rng);
    std::vector<int> warp = gen_warp(spec.t_x, spec.t_y, spec.warp_jitter, rng);

    Eigen::MatrixXd a_x, a_y;
    Eigen::VectorXd b_x, b_y;
    if (maps) {
        a_x = maps->a_x;
        a_y = maps->a_y;
        b_x = maps->b_x;
        b_y = maps->b_y;
        if (a_x.cols() != spec.latent_dim || a_y.cols() != spec.latent_dim ||
            a_x.rows() != spec.d_x || a_y.rows() != spec.d_y) {
            throw std::invalid_argument("gen_pair: injected map shapes do not match the spec");
        }
    } else {
        SynthMaps drawn = draw_maps(spec, rng);
        a_x = std::move(drawn.a_x);
        a_y = std::move(drawn.a_y);
        b_x = std::move(drawn.b_x);
        b_y = std::move(drawn.b_y);
    }

    Eigen::MatrixXd x = ((a_x * latent).colwise() + b_x).array().tanh();
    Eigen::MatrixXd y_lat(spec.latent_dim, spec.t_y);
    for (int s = 0; s < spec.t_y; ++s) {
        y_lat.col(s) = latent.col(warp[s] - 1);
    }
    Eigen::MatrixXd y = ((a_y * y_lat).colwise() + b_y).array().tanh();

    if (spec.noise_std > 0.0) {
        for (int c = 0; c < spec.t_x; ++c)
            for (int r = 0; r < spec.d_x; ++r) x(r, c) += spec.noise_std * gaussian(rng);
        for (int c = 0; c < spec.t_y; ++c)
            for (int r = 0; r < spec.d_y; ++r) y(r, c) += spec.noise_std * gaussian(rng);
    }

    SynthPair pair;
    pair.x = zscore_fit_apply({std::move(x)}).first;
    pair.y = zscore_fit_apply({std::move(y)}).first;
    pair.true_map = std::move(warp);
    pair.seed = seed;
    return pair;
}

void write_truth_csv(const std::filesystem::path& file, const std::vector<int>& true_map) {
    std::ofstream out(file);
    if (!out) {
        throw std::invalid_argument("write_truth_csv: cannot open " + file.string());
    }
    out << "y_index,x_index\n";
    for (std::size_t s = 0; s < true_map.size(); ++s) {
        out << s << ',' << true_map[s] - 1 << "\n";
    }
}

std::vector<int> read_truth_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw std::invalid_argument("read_truth_csv: cannot open " + file.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "y_index,x_index") {
        throw std::invalid_argument("read_truth_csv: bad header in " + file.string());
    }
    std::vector<int> map;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int y = 0, x = 0;
        if (std::sscanf(line.c_str(), "%d,%d", &y, &x) != 2) {
            throw std::invalid_argument("read_truth_csv: malformed row in " + file.string());
        }
        map.push_back(x + 1);
    }
    if (map.empty()) {
        throw std::invalid_argument("read_truth_csv: empty map in " + file.string());
    }
    return map;
}

void write_synth_pair(const std::filesystem::path& dir, const std::string& name,
                      const SynthPair& pair) {
    std::filesystem::create_directories(dir);
    write_sequence(dir / (name + "_x.seq"), pair.x);
    write_sequence(dir / (name + "_y.seq"), pair.y);
    write_truth_csv(dir / (name + "_truth.csv"), pair.true_map);
}

}  // namespace transience
