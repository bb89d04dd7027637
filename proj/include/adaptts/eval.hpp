#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaptts/classifier.hpp"
#include "adaptts/trainer.hpp"

namespace adaptts {

struct EvaluationReport {
  std::string strategy;
  std::string distance;
  double noise_ratio = 0.0;
  std::vector<double> rcc_values;  // one per repetition
  std::vector<std::uint64_t> seeds;

  double mean_rcc() const;
  double std_rcc() const;
};

void save_reports_csv(const std::vector<EvaluationReport>& reports,
                      const std::filesystem::path& file);

/// Fraction of examples whose argmax-probability label (ties -> lowest
/// label id) equals the ground truth.
double rcc(const ClassifierState& model, const Batch& test);

struct BinaryTask {
  PairedMultiSourceDataset train;  // positives upsampled to negative count
  PairedMultiSourceDataset test;   // negatives downsampled to positive count
};

/// Positive-vs-rest relabeling {1 = positive, 0 = negative} with
/// balancing: training positives are bootstrapped up to the negative
/// count, test negatives subsampled without replacement down to the
/// positive count. Resampled index lists are applied to every domain
/// identically so pairing survives.
BinaryTask make_binary_task(const PairedMultiSourceDataset& train,
                            const PairedMultiSourceDataset& test,
                            Label positive_label, std::uint64_t seed);

/// Adds zero-mean Gaussian noise with per-channel variance 0.02*|x_kt| to
/// a uniformly chosen subset of floor(ratio*T) timestamps.
TimeSeries inject_noise(const TimeSeries& series, double ratio,
                        std::uint64_t seed);

struct BenchmarkSpec {
  int domains = 3;        // V; domain 0 is the target
  int channels = 2;       // K
  int length = 32;        // T
  int series_per_label = 30;
  int label_count = 2;
  int subject_count = 8;
  double target_noise = 0.05;
  std::vector<double> source_corruption = {0.1, 1.0};  // one per source
};

/// Synthetic paired dataset with ground-truth similarity ordering: the
/// target is label-dependent sinusoid templates plus noise; each source is
/// a deterministic channelwise warp/scale of the paired target series plus
/// source-specific noise, so lower corruption means a closer domain.
PairedMultiSourceDataset synthesize_benchmark(const BenchmarkSpec& spec,
                                              std::uint64_t seed);

struct ExperimentConfig {
  std::vector<Strategy> strategies;
  DistanceMetric metric;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  Architecture arch;                 // channels/length/label_count filled per task
  int repetitions = 15;              // I
  std::vector<double> noise_ratios = {0.0};
  int train_subject_count = 6;
  int ipd_sample_count = 1000;
  std::uint64_t master_seed = 0;
  InitScheme init_scheme = InitScheme::UniformZeroOne;
};

/// The repetition harness: per repetition draws a fresh subject split,
/// positive label and seed stream, trains every strategy on identical
/// material, and scores RCC on the (optionally noise-injected) target-test
/// set. Reports are grouped by (strategy, noise ratio).
std::vector<EvaluationReport> run_experiment(
    const PairedMultiSourceDataset& dataset, const ExperimentConfig& cfg);

}  // namespace adaptts
