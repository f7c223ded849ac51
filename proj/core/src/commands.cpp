#include "transience/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "transience/errors.hpp"
#include "transience/gradsuite.hpp"
#include "transience/textio.hpp"

namespace transience {

namespace fs = std::filesystem;

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

int cmd_gen(const RunConfig& cfg) {
    validate(cfg);
    SynthSpec spec = to_synth_spec(cfg);
    fs::create_directories(cfg.out_dir);
    Rng data_rng = substream(cfg.seed, "data");
    SynthMaps maps = draw_maps(spec, data_rng);  // shared across the run's pairs
    for (int i = 0; i < cfg.n_train_pairs; ++i) {
        SynthPair pair = gen_pair(spec, data_rng(), &maps);
        write_synth_pair(cfg.out_dir, "train_" + std::to_string(i), pair);
    }
    for (int i = 0; i < cfg.n_test_pairs; ++i) {
        SynthPair pair = gen_pair(spec, data_rng(), &maps);
        write_synth_pair(cfg.out_dir, "test_" + std::to_string(i), pair);
    }
    std::cout << "wrote " << cfg.n_train_pairs << " train and " << cfg.n_test_pairs
              << " test pairs to " << cfg.out_dir << "\n";
    return kExitOk;
}

namespace {

std::vector<SynthPair> read_pairs(const fs::path& dir, const std::string& prefix) {
    std::vector<SynthPair> pairs;
    for (int i = 0;; ++i) {
        const fs::path x_file = dir / (prefix + "_" + std::to_string(i) + "_x.seq");
        if (!fs::exists(x_file)) break;
        SynthPair pair;
        pair.x = read_sequence(x_file);
        pair.y = read_sequence(dir / (prefix + "_" + std::to_string(i) + "_y.seq"));
        pair.true_map = read_truth_csv(dir / (prefix + "_" + std::to_string(i) + "_truth.csv"));
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
    validate(cfg);
    std::vector<SynthPair> raw = read_pairs(cfg.data_dir, "train");
    if (raw.empty()) {
        throw std::invalid_argument("train: no train_<i>_x.seq pairs under " + cfg.data_dir);
    }
    PreprocessConfig pre = to_preprocess_config(cfg);
    std::vector<SequencePair> pairs;
    for (const auto& p : raw) {
        pairs.push_back({preprocess(p.x, pre), preprocess(p.y, pre)});
    }

    fs::create_directories(cfg.out_dir);
    const Variant variant = variant_from_string(cfg.variant);
    TrainRun run;
    if (variant == Variant::uniform) {
        for (const auto& p : pairs) {
            run.paths.push_back(uniform_init_path(p.first.length(), p.second.length()));
        }
    } else if (variant == Variant::ctw) {
        run = ctw_fit(pairs, to_train_config(cfg));
        write_linear_model(fs::path(cfg.out_dir) / "linear.ckpt", *run.linear);
    } else {
        run = transience_fit(pairs, to_loss_config(cfg), to_train_config(cfg));
        write_checkpoint(fs::path(cfg.out_dir) / "model.ckpt", *run.stack);
    }

    for (std::size_t i = 0; i < run.paths.size(); ++i) {
        write_path_csv(fs::path(cfg.out_dir) / ("pair_" + std::to_string(i) + "_path.csv"),
                       run.paths[i]);
    }
    if (variant != Variant::uniform) {
        write_history_csv(fs::path(cfg.out_dir) / "history.csv", run);
        std::cout << "variant=" << cfg.variant << " outer_iters=" << run.history.size()
                  << " initial_dtw_cost=" << format_double(run.initial_dtw_cost)
                  << " final_dtw_cost=" << format_double(run.history.back().dtw_cost_total)
                  << "\n";
    } else {
        std::cout << "variant=uniform paths=" << run.paths.size() << "\n";
    }
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
    validate(cfg);
    BenchmarkSpec spec = to_benchmark_spec(cfg);
    std::vector<Variant> variants = parse_variants(cfg.variants);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < cfg.n_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

    std::vector<AlignmentReport> reports = compare_variants(spec, variants, seeds);
    fs::create_directories(cfg.out_dir);
    write_report_csv(fs::path(cfg.out_dir) / "report.csv", reports);

    VariantRanking ranking = rank_variants(reports);
    std::cout << "ranking by median mean_abs_dev:\n";
    for (const auto& [name, dev] : ranking.by_median_deviation) {
        std::cout << "  " << name << " " << format_double(dev) << "\n";
    }
    std::cout << "contrastive_first=" << (ranking.contrastive_first ? "true" : "false") << "\n";
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, const std::string& only, const std::string& corrupt) {
    GradSuiteOptions options;
    options.only = only;
    options.corrupt = corrupt;
    options.seed = cfg.seed == 0 ? options.seed : cfg.seed;
    std::vector<GradSuiteEntry> entries = run_gradcheck_suite(options);
    if (entries.empty()) {
        throw std::invalid_argument("gradcheck: no losses match '" + only + "'");
    }
    bool all_pass = true;
    for (const auto& e : entries) {
        std::printf("%-32s max_rel_error=%.3e %s\n", e.name.c_str(), e.max_rel_error,
                    e.pass ? "ok" : "FAIL");
        all_pass &= e.pass;
    }
    if (!all_pass) {
        std::cout << "gradcheck: tolerance breached\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int cmd_dtw_test(const RunConfig& cfg) {
    Rng rng = substream(cfg.seed, "dtw-test");
    int trials = 0, failures = 0;
    for (int tx = 1; tx <= 6; ++tx) {
        for (int ty = 1; ty <= 6; ++ty) {
            for (int rep = 0; rep < 200; ++rep) {
                Eigen::MatrixXd cost(tx, ty);
                for (int i = 0; i < tx; ++i) {
                    for (int j = 0; j < ty; ++j) cost(i, j) = uniform01(rng);
                }
                const DtwResult fast = dtw(cost);
                const DtwResult oracle = brute_force_dtw(cost);
                ++trials;
                if (fast.total_cost != oracle.total_cost) ++failures;
            }
        }
    }
    std::cout << "dtw-test: " << trials - failures << "/" << trials
              << " matrices match the brute-force oracle exactly\n";
    if (failures > 0) return kExitNumerical;
    return kExitOk;
}

}  // namespace transience
