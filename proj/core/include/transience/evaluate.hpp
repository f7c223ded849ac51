#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "transience/synth.hpp"
#include "transience/train.hpp"

namespace transience {

enum class Variant { contrastive, cca, mmi, ctw, uniform };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct AlignmentErrorStats {
    double mean_abs_deviation = 0.0;   // frames
    double median_abs_deviation = 0.0; // frames
    double pct_within_3 = 0.0;         // fraction in [0, 1]
};

/// Converts a path into a y->x correspondence (mean aligned x index per y
/// index) and compares against the ground-truth map.
AlignmentErrorStats alignment_error(const WarpingPathPair& path, const std::vector<int>& truth);

/// Mean aligned x index per y index (1-based, fractional).
std::vector<double> path_to_correspondence(const WarpingPathPair& path);

/// Per-y absolute deviations; the pieces alignment_error aggregates.
std::vector<double> alignment_deviations(const WarpingPathPair& path, const std::vector<int>& truth);

AlignmentErrorStats summarize_deviations(std::vector<double> deviations);

struct DownstreamConfig {
    std::vector<int> hidden{64, 64};
    double leak = 0.03;
    double lr = 1e-3;
    int epochs = 30;
    int batch_size = 128;
    std::uint64_t seed = 0;
};

/// Trains a small x->y regressor on frame pairs gathered by the given paths
/// and reports mean squared error (per element) on truth-aligned test frames.
double downstream_eval(const std::vector<SynthPair>& train_pairs,
                       const std::vector<WarpingPathPair>& paths,
                       const std::vector<SynthPair>& test_pairs,
                       const DownstreamConfig& cfg);

/// Same regressor trained on ground-truth alignments (the reference bound).
double downstream_oracle(const std::vector<SynthPair>& train_pairs,
                         const std::vector<SynthPair>& test_pairs,
                         const DownstreamConfig& cfg);

struct AlignmentReport {
    std::string variant;
    std::uint64_t seed = 0;
    double mean_abs_deviation = 0.0;
    double median_abs_deviation = 0.0;
    double pct_within_3 = 0.0;
    double dtw_cost = 0.0;
    double downstream_mse = 0.0;
    double oracle_mse = 0.0;
};

/// Feature pipeline applied before alignment (z-scoring always runs first).
struct PreprocessConfig {
    bool deltas = true;
    int context_width = 1;   // odd; 1 disables context windows (and PCA)
    int pca_retained = 30;   // used only when context_width > 1
};

FeatureSequence preprocess(const FeatureSequence& seq, const PreprocessConfig& cfg);

struct BenchmarkSpec {
    SynthSpec synth;
    int n_train_pairs = 3;
    int n_test_pairs = 2;
    PreprocessConfig preprocess;
    LossConfig loss;          // base config; dependence overridden per variant
    TrainConfig train;
    DownstreamConfig downstream;
};

/// Runs each variant x seed on identical synthetic pairs and reports
/// alignment error plus downstream regression error per run.
std::vector<AlignmentReport> compare_variants(const BenchmarkSpec& spec,
                                              const std::vector<Variant>& variants,
                                              const std::vector<std::uint64_t>& seeds);

/// Runs one variant on pre-generated pairs (compare_variants per-cell body).
AlignmentReport run_variant(const BenchmarkSpec& spec, Variant variant, std::uint64_t seed,
                            const std::vector<SynthPair>& train_pairs,
                            const std::vector<SynthPair>& test_pairs,
                            double oracle_mse);

struct VariantRanking {
    std::vector<std::pair<std::string, double>> by_median_deviation;  // ascending
    bool contrastive_first = false;
};

VariantRanking rank_variants(const std::vector<AlignmentReport>& reports);

double median(std::vector<double> values);

/// CSV: variant,seed,mean_abs_dev,median_abs_dev,pct_within_3,dtw_cost,
/// downstream_mse,oracle_mse (one leading comment line marks these as
/// synthetic-benchmark proxy metrics).
void write_report_csv(const std::filesystem::path& file,
                      const std::vector<AlignmentReport>& reports);

}  // namespace transience
