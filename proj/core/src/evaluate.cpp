#include "transience/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "transience/errors.hpp"
#include "transience/textio.hpp"

namespace transience {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::contrastive: return "contrastive";
        case Variant::cca: return "cca";
        case Variant::mmi: return "mmi";
        case Variant::ctw: return "ctw";
        case Variant::uniform: return "uniform";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "contrastive") return Variant::contrastive;
    if (s == "cca") return Variant::cca;
    if (s == "mmi") return Variant::mmi;
    if (s == "ctw") return Variant::ctw;
    if (s == "uniform") return Variant::uniform;
    throw std::invalid_argument("unknown variant: " + s);
}

std::vector<double> path_to_correspondence(const WarpingPathPair& path) {
    const int t_y = path.phi_y.back();
    std::vector<double> sum(static_cast<std::size_t>(t_y), 0.0);
    std::vector<int> count(static_cast<std::size_t>(t_y), 0);
    for (int t = 0; t < path.length(); ++t) {
        const auto j = static_cast<std::size_t>(path.phi_y[t] - 1);
        sum[j] += path.phi_x[t];
        count[j] += 1;
    }
    std::vector<double> corr(static_cast<std::size_t>(t_y), 0.0);
    for (std::size_t j = 0; j < corr.size(); ++j) {
        corr[j] = sum[j] / count[j];  // every y index is visited by a valid path
    }
    return corr;
}

std::vector<double> alignment_deviations(const WarpingPathPair& path, const std::vector<int>& truth) {
    std::vector<double> corr = path_to_correspondence(path);
    if (corr.size() != truth.size()) {
        throw std::invalid_argument("alignment_error: path and truth lengths differ");
    }
    std::vector<double> dev(corr.size());
    for (std::size_t j = 0; j < corr.size(); ++j) {
        dev[j] = std::abs(corr[j] - truth[j]);
    }
    return dev;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("median: empty input");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AlignmentErrorStats summarize_deviations(std::vector<double> deviations) {
    if (deviations.empty()) {
        throw std::invalid_argument("summarize_deviations: empty input");
    }
    AlignmentErrorStats stats;
    double sum = 0.0;
    int within = 0;
    for (double d : deviations) {
        sum += d;
        if (d <= 3.0) ++within;
    }
    stats.mean_abs_deviation = sum / static_cast<double>(deviations.size());
    stats.pct_within_3 = static_cast<double>(within) / static_cast<double>(deviations.size());
    stats.median_abs_deviation = median(std::move(deviations));
    return stats;
}

AlignmentErrorStats alignment_error(const WarpingPathPair& path, const std::vector<int>& truth) {
    return summarize_deviations(alignment_deviations(path, truth));
}

namespace {

struct FramePairs {
    Eigen::MatrixXd x;  // d_x x M
    Eigen::MatrixXd y;  // d_y x M
};

FramePairs frames_from_paths(const std::vector<SynthPair>& pairs,
                             const std::vector<WarpingPathPair>& paths) {
    long total = 0;
    for (const auto& p : paths) total += p.length();
    FramePairs out;
    out.x.resize(pairs[0].x.dim(), total);
    out.y.resize(pairs[0].y.dim(), total);
    long col = 0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        auto [gx, gy] = gather_aligned(pairs[p].x, pairs[p].y, paths[p]);
        out.x.middleCols(col, gx.cols()) = gx;
        out.y.middleCols(col, gy.cols()) = gy;
        col += gx.cols();
    }
    return out;
}

FramePairs frames_from_truth(const std::vector<SynthPair>& pairs) {
    long total = 0;
    for (const auto& p : pairs) total += static_cast<long>(p.true_map.size());
    FramePairs out;
    out.x.resize(pairs[0].x.dim(), total);
    out.y.resize(pairs[0].y.dim(), total);
    long col = 0;
    for (const auto& p : pairs) {
        for (std::size_t s = 0; s < p.true_map.size(); ++s, ++col) {
            out.x.col(col) = p.x.data.col(p.true_map[s] - 1);
            out.y.col(col) = p.y.data.col(static_cast<Eigen::Index>(s));
        }
    }
    return out;
}

double train_and_score_regressor(const FramePairs& train, const FramePairs& test,
                                 const DownstreamConfig& cfg) {
    if (train.x.cols() == 0) {
        throw std::invalid_argument("downstream_eval: empty training set");
    }
    Rng rng_init = substream(cfg.seed, "downstream-init");
    Rng rng_batch = substream(cfg.seed, "downstream-batching");
    Mlp net = make_mlp(static_cast<int>(train.x.rows()), cfg.hidden,
                       static_cast<int>(train.y.rows()), cfg.leak, rng_init);
    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;
    AdamState adam = make_adam_state(net, adam_cfg);

    const auto m = train.x.cols();
    std::vector<long> order(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng_batch);
        for (long begin = 0; begin < m; begin += cfg.batch_size) {
            const long end = std::min<long>(m, begin + cfg.batch_size);
            if (end - begin < 2) continue;
            Eigen::MatrixXd xb(train.x.rows(), end - begin);
            Eigen::MatrixXd yb(train.y.rows(), end - begin);
            for (long i = begin; i < end; ++i) {
                xb.col(i - begin) = train.x.col(order[static_cast<std::size_t>(i)]);
                yb.col(i - begin) = train.y.col(order[static_cast<std::size_t>(i)]);
            }
            ForwardCache cache;
            Eigen::MatrixXd pred = forward(net, xb, &cache);
            // MSE per element; gradient 2/(N*d) * residual
            Eigen::MatrixXd resid = pred - yb;
            const double scale = 2.0 / static_cast<double>(resid.size());
            MlpGrads grads = zero_grads(net);
            backward(net, cache, scale * resid, grads);
            adam_step(net, grads, adam);
        }
    }

    Eigen::MatrixXd pred = forward(net, test.x);
    return (pred - test.y).squaredNorm() / static_cast<double>(test.y.size());
}

}  // namespace

double downstream_eval(const std::vector<SynthPair>& train_pairs,
                       const std::vector<WarpingPathPair>& paths,
                       const std::vector<SynthPair>& test_pairs,
                       const DownstreamConfig& cfg) {
    if (train_pairs.empty() || paths.size() != train_pairs.size()) {
        throw std::invalid_argument("downstream_eval: need one path per training pair");
    }
    if (test_pairs.empty()) {
        throw std::invalid_argument("downstream_eval: need at least one test pair");
    }
    return train_and_score_regressor(frames_from_paths(train_pairs, paths),
                                     frames_from_truth(test_pairs), cfg);
}

double downstream_oracle(const std::vector<SynthPair>& train_pairs,
                         const std::vector<SynthPair>& test_pairs,
                         const DownstreamConfig& cfg) {
    if (train_pairs.empty() || test_pairs.empty()) {
        throw std::invalid_argument("downstream_oracle: need train and test pairs");
    }
    return train_and_score_regressor(frames_from_truth(train_pairs),
                                     frames_from_truth(test_pairs), cfg);
}

FeatureSequence preprocess(const FeatureSequence& seq, const PreprocessConfig& cfg) {
    FeatureSequence out = zscore_fit_apply(seq).first;
    if (cfg.deltas) out = add_deltas(out);
    if (cfg.context_width > 1) {
        out = context_window(out, cfg.context_width);
        const int bound = std::min(out.length() - 1, out.dim());
        const int retained = std::min(cfg.pca_retained, bound);
        PcaModel pca = pca_fit(out.data, retained);
        out = FeatureSequence{pca_apply(pca, out.data)};
    }
    return out;
}

AlignmentReport run_variant(const BenchmarkSpec& spec, Variant variant, std::uint64_t seed,
                            const std::vector<SynthPair>& train_pairs,
                            const std::vector<SynthPair>& test_pairs,
                            double oracle_mse) {
    std::vector<SequencePair> prepped;
    for (const auto& p : train_pairs) {
        prepped.push_back({preprocess(p.x, spec.preprocess), preprocess(p.y, spec.preprocess)});
    }

    TrainConfig train_cfg = spec.train;
    train_cfg.seed = substream(seed, "train-" + to_string(variant))();

    std::vector<WarpingPathPair> paths;
    double dtw_cost = std::numeric_limits<double>::quiet_NaN();
    if (variant == Variant::uniform) {
        for (const auto& p : train_pairs) {
            paths.push_back(uniform_init_path(p.x.length(), p.y.length()));
        }
    } else if (variant == Variant::ctw) {
        TrainRun run = ctw_fit(prepped, train_cfg);
        paths = run.paths;
        dtw_cost = run.history.back().dtw_cost_total;
    } else {
        LossConfig loss = spec.loss;
        loss.dependence = variant == Variant::contrastive ? Dependence::contrastive
                          : variant == Variant::cca       ? Dependence::cca
                                                          : Dependence::mmi;
        TrainRun run = transience_fit(prepped, loss, train_cfg);
        paths = run.paths;
        dtw_cost = run.history.back().dtw_cost_total;
    }

    std::vector<double> deviations;
    for (std::size_t p = 0; p < train_pairs.size(); ++p) {
        std::vector<double> d = alignment_deviations(paths[p], train_pairs[p].true_map);
        deviations.insert(deviations.end(), d.begin(), d.end());
    }
    AlignmentErrorStats stats = summarize_deviations(std::move(deviations));

    DownstreamConfig ds = spec.downstream;
    ds.seed = substream(seed, "downstream-" + to_string(variant))();

    AlignmentReport report;
    report.variant = to_string(variant);
    report.seed = seed;
    report.mean_abs_deviation = stats.mean_abs_deviation;
    report.median_abs_deviation = stats.median_abs_deviation;
    report.pct_within_3 = stats.pct_within_3;
    report.dtw_cost = dtw_cost;
    report.downstream_mse = downstream_eval(train_pairs, paths, test_pairs, ds);
    report.oracle_mse = oracle_mse;
    return report;
}

std::vector<AlignmentReport> compare_variants(const BenchmarkSpec& spec,
                                              const std::vector<Variant>& variants,
                                              const std::vector<std::uint64_t>& seeds) {
    if (variants.empty()) {
        throw std::invalid_argument("compare_variants: need at least one variant");
    }
    if (seeds.empty()) {
        throw std::invalid_argument("compare_variants: need at least one seed");
    }
    std::vector<AlignmentReport> reports;
    for (std::uint64_t seed : seeds) {
        std::vector<SynthPair> train_pairs, test_pairs;
        Rng data_rng = substream(seed, "data");
        // one observation-map draw per run: train and test pairs share the
        // same cross-view relationship, as utterances of one speaker would
        SynthMaps maps = draw_maps(spec.synth, data_rng);
        for (int i = 0; i < spec.n_train_pairs; ++i) {
            train_pairs.push_back(gen_pair(spec.synth, data_rng(), &maps));
        }
        for (int i = 0; i < spec.n_test_pairs; ++i) {
            test_pairs.push_back(gen_pair(spec.synth, data_rng(), &maps));
        }
        DownstreamConfig ds = spec.downstream;
        ds.seed = substream(seed, "downstream-oracle")();
        const double oracle_mse = downstream_oracle(train_pairs, test_pairs, ds);
        for (Variant variant : variants) {
            reports.push_back(run_variant(spec, variant, seed, train_pairs, test_pairs, oracle_mse));
        }
    }
    return reports;
}

VariantRanking rank_variants(const std::vector<AlignmentReport>& reports) {
    std::vector<std::string> names;
    for (const auto& r : reports) {
        if (std::find(names.begin(), names.end(), r.variant) == names.end()) {
            names.push_back(r.variant);
        }
    }
    VariantRanking ranking;
    for (const auto& name : names) {
        std::vector<double> devs;
        for (const auto& r : reports) {
            if (r.variant == name) devs.push_back(r.mean_abs_deviation);
        }
        ranking.by_median_deviation.push_back({name, median(std::move(devs))});
    }
    std::stable_sort(ranking.by_median_deviation.begin(), ranking.by_median_deviation.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    ranking.contrastive_first = !ranking.by_median_deviation.empty() &&
                                ranking.by_median_deviation.front().first == "contrastive";
    return ranking;
}

void write_report_csv(const std::filesystem::path& file,
                      const std::vector<AlignmentReport>& reports) {
    std::ofstream out(file);
    if (!out) {
        throw std::invalid_argument("write_report_csv: cannot open " + file.string());
    }
    out << "# synthetic-benchmark proxy metrics (frame deviations, regression MSE); "
           "not comparable to published speech metrics\n";
    out << "variant,seed,mean_abs_dev,median_abs_dev,pct_within_3,dtw_cost,"
           "downstream_mse,oracle_mse\n";
    for (const auto& r : reports) {
        out << r.variant << ',' << r.seed << ',' << format_double(r.mean_abs_deviation) << ','
            << format_double(r.median_abs_deviation) << ',' << format_double(r.pct_within_3)
            << ',' << format_double(r.dtw_cost) << ',' << format_double(r.downstream_mse) << ','
            << format_double(r.oracle_mse) << "\n";
    }
}

}  // namespace transience
