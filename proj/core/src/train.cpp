#include "transience/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "transience/errors.hpp"
#include "transience/linalg.hpp"
#include "transience/textio.hpp"

namespace transience {

void validate(const TrainConfig& cfg) {
    if (cfg.d_z < 1) throw std::invalid_argument("TrainConfig: d_z must be positive");
    if (cfg.batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (cfg.epochs_per_phase < 1) throw std::invalid_argument("TrainConfig: epochs_per_phase must be >= 1");
    if (cfg.max_outer_iterations < 1) throw std::invalid_argument("TrainConfig: max_outer_iterations must be >= 1");
    if (cfg.convergence_threshold < 0.0 || cfg.convergence_threshold > 1.0) {
        throw std::invalid_argument("TrainConfig: convergence_threshold must be in [0, 1]");
    }
    if (cfg.ctw_regularizer <= 0.0) throw std::invalid_argument("TrainConfig: ctw_regularizer must be > 0");
    if (cfg.kde_sigma_init <= 0.0) throw std::invalid_argument("TrainConfig: kde_sigma_init must be > 0");
}

double path_change_fraction(const WarpingPathPair& a, const WarpingPathPair& b) {
    std::set<std::pair<int, int>> cells_a;
    for (int t = 0; t < a.length(); ++t) cells_a.insert({a.phi_x[t], a.phi_y[t]});
    int shared = 0;
    for (int t = 0; t < b.length(); ++t) {
        if (cells_a.count({b.phi_x[t], b.phi_y[t]})) ++shared;
    }
    const int denom = std::max(a.length(), b.length());
    return 1.0 - static_cast<double>(shared) / static_cast<double>(denom);
}

namespace {

struct AlignedPool {
    // flat (pair, frame) references into the current alignment
    std::vector<std::pair<int, int>> slots;
};

AlignedPool build_pool(const std::vector<WarpingPathPair>& paths) {
    AlignedPool pool;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (int t = 0; t < paths[p].length(); ++t) {
            pool.slots.push_back({static_cast<int>(p), t});
        }
    }
    return pool;
}

void gather_batch(const std::vector<SequencePair>& pairs,
                  const std::vector<WarpingPathPair>& paths,
                  const std::vector<std::pair<int, int>>& slots,
                  std::size_t begin, std::size_t end,
                  Eigen::MatrixXd& xb, Eigen::MatrixXd& yb) {
    const auto n = static_cast<Eigen::Index>(end - begin);
    xb.resize(pairs[0].first.dim(), n);
    yb.resize(pairs[0].second.dim(), n);
    for (std::size_t s = begin; s < end; ++s) {
        const auto [p, t] = slots[s];
        xb.col(static_cast<Eigen::Index>(s - begin)) = pairs[p].first.data.col(paths[p].phi_x[t] - 1);
        yb.col(static_cast<Eigen::Index>(s - begin)) = pairs[p].second.data.col(paths[p].phi_y[t] - 1);
    }
}

void check_pairs(const std::vector<SequencePair>& pairs) {
    if (pairs.empty()) {
        throw std::invalid_argument("fit: need at least one sequence pair");
    }
    for (const auto& [x, y] : pairs) {
        validate(x);
        validate(y);
        if (x.dim() != pairs[0].first.dim() || y.dim() != pairs[0].second.dim()) {
            throw std::invalid_argument("fit: all pairs must share per-view dims");
        }
    }
}

// phase 2 for any projection: recompute every pair's path by DTW
struct Phase2Result {
    std::vector<WarpingPathPair> paths;
    double total_cost = 0.0;
};

template <typename ProjectFn>
Phase2Result run_dtw_phase(const std::vector<SequencePair>& pairs, DtwMetric metric,
                           ProjectFn&& project) {
    Phase2Result out;
    for (const auto& pair : pairs) {
        auto [zx, zy] = project(pair.first, pair.second);
        Eigen::MatrixXd dist = pairwise_distance(zx, zy, metric);
        DtwResult r = dtw(dist);
        out.total_cost += r.total_cost;
        out.paths.push_back(std::move(r.path));
    }
    return out;
}

template <typename ProjectFn>
double uniform_paths_cost(const std::vector<SequencePair>& pairs, DtwMetric metric,
                          const std::vector<WarpingPathPair>& paths, ProjectFn&& project) {
    double total = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [zx, zy] = project(pairs[p].first, pairs[p].second);
        total += path_cost(pairwise_distance(zx, zy, metric), paths[p]);
    }
    return total;
}

double mean_change(const std::vector<WarpingPathPair>& old_paths,
                   const std::vector<WarpingPathPair>& new_paths) {
    double changed = 0.0;
    for (std::size_t p = 0; p < old_paths.size(); ++p) {
        changed += path_change_fraction(old_paths[p], new_paths[p]);
    }
    return changed / static_cast<double>(old_paths.size());
}

}  // namespace

TrainRun transience_fit(const std::vector<SequencePair>& pairs,
                        const LossConfig& loss_cfg, const TrainConfig& cfg) {
    check_pairs(pairs);
    validate(cfg);
    validate(loss_cfg);

    Rng rng_init = substream(cfg.seed, "init");
    Rng rng_batch = substream(cfg.seed, "batching");
    Rng rng_shuffle = substream(cfg.seed, "shuffle");

    StackSpec spec;
    spec.d_x = pairs[0].first.dim();
    spec.d_y = pairs[0].second.dim();
    spec.d_z = cfg.d_z;
    spec.d_z_tilde = cfg.d_z_tilde;
    spec.hidden = cfg.hidden;
    spec.leak = cfg.leak;
    spec.use_autoencoder = loss_cfg.use_autoencoder;
    spec.use_private = loss_cfg.use_private;

    TrainRun run;
    run.stack = make_encoder_stack(spec, rng_init);
    EncoderStack& stack = *run.stack;
    stack.log_kde_sigma.setConstant(std::log(cfg.kde_sigma_init));

    AdamState adam_fx = make_adam_state(stack.encoder_x, cfg.adam);
    AdamState adam_gy = make_adam_state(stack.encoder_y, cfg.adam);
    AdamState adam_px, adam_py, adam_dx, adam_dy;
    if (stack.use_private) {
        adam_px = make_adam_state(stack.private_x, cfg.adam);
        adam_py = make_adam_state(stack.private_y, cfg.adam);
    }
    if (stack.use_autoencoder) {
        adam_dx = make_adam_state(stack.decoder_x, cfg.adam);
        adam_dy = make_adam_state(stack.decoder_y, cfg.adam);
    }
    AdamVecState adam_bw = make_adam_state(stack.log_kde_sigma, cfg.adam);

    for (const auto& pair : pairs) {
        run.paths.push_back(uniform_init_path(pair.first.length(), pair.second.length()));
    }

    auto project = [&stack](const FeatureSequence& x, const FeatureSequence& y) {
        return std::pair{forward(stack.encoder_x, x.data), forward(stack.encoder_y, y.data)};
    };

    // minimum batch usable by every loss in play
    const int min_batch = std::max({3, cfg.d_z + 1, 2});

    // pre-training state: objective on the first frames of the pooled
    // alignment, uniform-path cost under the initial projections
    {
        AlignedPool pool = build_pool(run.paths);
        const std::size_t n0 = std::min<std::size_t>(pool.slots.size(),
                                                     static_cast<std::size_t>(cfg.batch_size));
        Eigen::MatrixXd xb, yb;
        gather_batch(pairs, run.paths, pool.slots, 0, n0, xb, yb);
        Rng rng_eval = substream(cfg.seed, "init-eval");
        run.initial_objective = total_objective(stack, xb, yb, loss_cfg, rng_eval).value;
        run.initial_dtw_cost = uniform_paths_cost(pairs, cfg.metric, run.paths, project);
    }

    for (int outer = 1; outer <= cfg.max_outer_iterations; ++outer) {
        // phase 1: minimize the objective over minibatches of aligned frames
        AlignedPool pool = build_pool(run.paths);
        double obj_sum = 0.0;
        long obj_count = 0;
        for (int epoch = 0; epoch < cfg.epochs_per_phase; ++epoch) {
            shuffle(pool.slots, rng_batch);
            for (std::size_t begin = 0; begin < pool.slots.size();
                 begin += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t end =
                    std::min(pool.slots.size(), begin + static_cast<std::size_t>(cfg.batch_size));
                if (end - begin < static_cast<std::size_t>(min_batch)) continue;
                Eigen::MatrixXd xb, yb;
                gather_batch(pairs, run.paths, pool.slots, begin, end, xb, yb);
                ObjectiveResult res = total_objective(stack, xb, yb, loss_cfg, rng_shuffle);
                if (!std::isfinite(res.value)) {
                    throw DivergenceError(
                        "transience_fit: nonfinite objective at outer iteration " +
                            std::to_string(outer),
                        outer);
                }
                try {
                    adam_step(stack.encoder_x, res.grads.encoder_x, adam_fx);
                    adam_step(stack.encoder_y, res.grads.encoder_y, adam_gy);
                    if (stack.use_private) {
                        adam_step(stack.private_x, res.grads.private_x, adam_px);
                        adam_step(stack.private_y, res.grads.private_y, adam_py);
                    }
                    if (stack.use_autoencoder) {
                        adam_step(stack.decoder_x, res.grads.decoder_x, adam_dx);
                        adam_step(stack.decoder_y, res.grads.decoder_y, adam_dy);
                    }
                    if (loss_cfg.dependence == Dependence::mmi) {
                        Eigen::VectorXd bw_grad = res.grads.log_kde_sigma;
                        Eigen::VectorXd bw = stack.log_kde_sigma;
                        adam_step(bw, bw_grad, adam_bw);
                        stack.log_kde_sigma = bw;
                    }
                } catch (const NumericalError& e) {
                    throw DivergenceError(
                        std::string(e.what()) + " at outer iteration " + std::to_string(outer),
                        outer);
                }
                obj_sum += res.value;
                ++obj_count;
            }
        }

        // phase 2: recompute paths by DTW over frozen-encoder latents
        Phase2Result phase2 = run_dtw_phase(pairs, cfg.metric, project);
        const double change = mean_change(run.paths, phase2.paths);
        run.paths = std::move(phase2.paths);
        run.history.push_back({outer, obj_count > 0 ? obj_sum / obj_count : 0.0,
                               phase2.total_cost, change});
        if (change < cfg.convergence_threshold) break;
    }
    return run;
}

namespace {

LinearCcaModel linear_cca(const Eigen::MatrixXd& hx, const Eigen::MatrixXd& hy,
                          int d_z, double reg) {
    LinearCcaModel model;
    model.mean_x = hx.rowwise().mean();
    model.mean_y = hy.rowwise().mean();
    Eigen::MatrixXd sxx = covariance(hx, hx, reg);
    Eigen::MatrixXd syy = covariance(hy, hy, reg);
    Eigen::MatrixXd sxy = covariance(hx, hy);
    Eigen::MatrixXd wx = inv_sqrt_psd(sxx, 1e-6);
    Eigen::MatrixXd wy = inv_sqrt_psd(syy, 1e-6);
    Eigen::MatrixXd t = wx * sxy * wy;

    // singular vectors of T via the eigendecomposition of T T^T
    SymmetricEigen eig = sym_eig(t * t.transpose());
    const int dx = static_cast<int>(t.rows());
    const int keep = std::min({d_z, dx, static_cast<int>(t.cols())});
    model.proj_x.resize(keep, dx);
    model.proj_y.resize(keep, t.cols());
    model.correlations.resize(keep);
    for (int i = 0; i < keep; ++i) {
        const int src = dx - 1 - i;  // descending eigenvalues
        const double sigma = std::sqrt(std::max(eig.eigenvalues[src], 0.0));
        Eigen::VectorXd u = eig.eigenvectors.col(src);
        Eigen::VectorXd v = t.transpose() * u / std::max(sigma, 1e-12);
        model.correlations[i] = sigma;
        model.proj_x.row(i) = (u.transpose() * wx);
        model.proj_y.row(i) = (v.transpose() * wy);
    }
    return model;
}

}  // namespace

TrainRun ctw_fit(const std::vector<SequencePair>& pairs, const TrainConfig& cfg) {
    check_pairs(pairs);
    validate(cfg);

    TrainRun run;
    for (const auto& pair : pairs) {
        run.paths.push_back(uniform_init_path(pair.first.length(), pair.second.length()));
    }

    auto project = [&run](const FeatureSequence& x, const FeatureSequence& y) {
        const LinearCcaModel& m = *run.linear;
        return std::pair{Eigen::MatrixXd(m.proj_x * (x.data.colwise() - m.mean_x)),
                         Eigen::MatrixXd(m.proj_y * (y.data.colwise() - m.mean_y))};
    };

    // pre-training state: fit on the uniform alignment once for the initial cost
    {
        AlignedPool pool = build_pool(run.paths);
        Eigen::MatrixXd hx, hy;
        gather_batch(pairs, run.paths, pool.slots, 0, pool.slots.size(), hx, hy);
        run.linear = linear_cca(hx, hy, cfg.d_z, cfg.ctw_regularizer);
        run.initial_objective = std::sqrt(run.linear->correlations.array().square().sum());
        run.initial_dtw_cost = uniform_paths_cost(pairs, cfg.metric, run.paths, project);
    }

    for (int outer = 1; outer <= cfg.max_outer_iterations; ++outer) {
        AlignedPool pool = build_pool(run.paths);
        Eigen::MatrixXd hx, hy;
        gather_batch(pairs, run.paths, pool.slots, 0, pool.slots.size(), hx, hy);
        run.linear = linear_cca(hx, hy, cfg.d_z, cfg.ctw_regularizer);
        const double objective = std::sqrt(run.linear->correlations.array().square().sum());
        if (!std::isfinite(objective)) {
            throw DivergenceError("ctw_fit: nonfinite objective at outer iteration " +
                                      std::to_string(outer),
                                  outer);
        }

        Phase2Result phase2 = run_dtw_phase(pairs, cfg.metric, project);
        const double change = mean_change(run.paths, phase2.paths);
        run.paths = std::move(phase2.paths);
        run.history.push_back({outer, objective, phase2.total_cost, change});
        if (change < cfg.convergence_threshold) break;
    }
    return run;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> project_pair(const TrainRun& run,
                                                         const FeatureSequence& x,
                                                         const FeatureSequence& y) {
    if (run.stack) {
        return {forward(run.stack->encoder_x, x.data), forward(run.stack->encoder_y, y.data)};
    }
    if (run.linear) {
        const LinearCcaModel& m = *run.linear;
        return {m.proj_x * (x.data.colwise() - m.mean_x),
                m.proj_y * (y.data.colwise() - m.mean_y)};
    }
    throw std::invalid_argument("project_pair: run holds no trained model");
}

void write_history_csv(const std::filesystem::path& file, const TrainRun& run) {
    std::ofstream out(file);
    if (!out) {
        throw std::invalid_argument("write_history_csv: cannot open " + file.string());
    }
    out << "outer_iter,objective,dtw_cost_total,path_change_fraction\n";
    out << "0," << format_double(run.initial_objective) << ','
        << format_double(run.initial_dtw_cost) << ",1\n";
    for (const auto& rec : run.history) {
        out << rec.outer_iter << ',' << format_double(rec.objective) << ','
            << format_double(rec.dtw_cost_total) << ','
            << format_double(rec.path_change_fraction) << "\n";
    }
}

void write_linear_model(const std::filesystem::path& file, const LinearCcaModel& model) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::invalid_argument("write_linear_model: cannot open " + file.string());
    }
    const auto d_z = model.proj_x.rows();
    out << "transience-linear v1\n";
    out << "dims d_z=" << d_z << " d_x=" << model.proj_x.cols()
        << " d_y=" << model.proj_y.cols() << "\n";
    out << "end-header\n";
    auto write_mat = [&out](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
    };
    write_mat(model.proj_x);
    write_mat(model.proj_y);
    write_mat(model.mean_x);
    write_mat(model.mean_y);
    write_mat(model.correlations);
}

LinearCcaModel read_linear_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::invalid_argument("read_linear_model: cannot open " + file.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "transience-linear v1") {
        throw std::invalid_argument("read_linear_model: unknown format tag");
    }
    int d_z = 0, d_x = 0, d_y = 0;
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "dims d_z=%d d_x=%d d_y=%d", &d_z, &d_x, &d_y) != 3) {
        throw std::invalid_argument("read_linear_model: bad dims line");
    }
    std::getline(in, line);
    if (line != "end-header") {
        throw std::invalid_argument("read_linear_model: missing end-header");
    }
    LinearCcaModel model;
    auto read_mat = [&in](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v = 0;
                in.read(reinterpret_cast<char*>(&v), sizeof(v));
                m(r, c) = v;
            }
        }
    };
    read_mat(model.proj_x, d_z, d_x);
    read_mat(model.proj_y, d_z, d_y);
    Eigen::MatrixXd mx, my, corr;
    read_mat(mx, d_x, 1);
    read_mat(my, d_y, 1);
    read_mat(corr, d_z, 1);
    model.mean_x = mx.col(0);
    model.mean_y = my.col(0);
    model.correlations = corr.col(0);
    if (!in) {
        throw std::invalid_argument("read_linear_model: truncated tensor block");
    }
    return model;
}

}  // namespace transience
