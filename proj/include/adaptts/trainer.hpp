#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adaptts/classifier.hpp"
#include "adaptts/similarity.hpp"
#include "adaptts/timeseries.hpp"

namespace adaptts {

struct PretrainConfig {
  double lambda0 = 5e-4;  // initial learning rate, shared by all source domains
  int epochs = 50;        // J, epochs per source domain
  std::uint64_t seed = 0;
};

struct FinetuneConfig {
  double lambda_target = 1e-3;  // baseline target-domain learning rate
  int max_epochs = 100;         // J_target
  int k_folds = 10;
  int max_degenerations = 5;    // R
  double lr_floor = 1e-6;
  std::uint64_t seed = 0;
};

struct TraceRow {
  std::string phase;   // "pretrain" or "finetune"
  std::string domain;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  int fold = -1;       // validation fold, finetune only
  int degenerations = 0;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;

  void save_csv(const std::filesystem::path& file) const;
  std::vector<TraceRow> phase_rows(const std::string& phase) const;
};

/// Sequential pre-training over source domains in weights.order (g
/// descending). Within domain q the learning rate starts at lambda0 and
/// decays by (1 - alpha_q) each epoch; the final parameters seed the next
/// domain.
std::pair<ClassifierState, TrainingTrace> pretrain(
    const PairedMultiSourceDataset& dataset, const DomainWeights& weights,
    const ClassifierState& model, const PretrainConfig& cfg);

/// As pretrain but with a seed-deterministic random domain order; the
/// per-domain alphas are unchanged.
std::pair<ClassifierState, TrainingTrace> pretrain_random_order(
    const PairedMultiSourceDataset& dataset, const DomainWeights& weights,
    const ClassifierState& model, const PretrainConfig& cfg,
    std::uint64_t order_seed);

/// Seeded partition of {0..n-1} into k disjoint folds with sizes differing
/// by at most one. Shared by finetune and exposed for direct checking.
std::vector<std::vector<int>> make_folds(int n, int k, std::uint64_t seed);

/// Test hook: overrides the validation loss fed into the adaptive
/// learning-rate rule. Arguments are (epoch, actual validation loss).
using ValidationLossHook = std::function<double(int, double)>;

/// Fine-tuning with k-fold cross-validation: the target data is
/// partitioned once into k near-equal folds; each epoch draws a fold
/// uniformly as validation, takes one gradient step on the complement at
/// rate clamp((1 - validation_loss) * lambda_target, lr_floor,
/// lambda_target), and counts consecutive epochs whose rate strictly
/// increased. Stops at max_degenerations consecutive increases or at
/// max_epochs.
std::pair<ClassifierState, TrainingTrace> finetune(
    const DomainDataset& target, const std::vector<Label>& labels,
    const ClassifierState& model, const FinetuneConfig& cfg,
    const ValidationLossHook& val_loss_hook = nullptr);

enum class Strategy {
  Adaptive,
  NoTransfer,
  DirectTransfer,
  NoPairing,
  AdaptiveRandomOrder,
  AdaptiveTop2
};

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy s);

struct PipelineResult {
  ClassifierState model;
  std::optional<ClassifierState> pretrained;  // state after the source phase
  std::optional<IpdReport> ipd;
  TrainingTrace trace;
};

/// End-to-end run of one strategy: similarity computation (where the
/// strategy uses it), pre-training, fine-tuning.
PipelineResult train_full_pipeline(const PairedMultiSourceDataset& dataset,
                                   const DistanceMetric& metric,
                                   const PretrainConfig& pre_cfg,
                                   const FinetuneConfig& fine_cfg,
                                   Strategy strategy,
                                   const ClassifierState& init,
                                   int ipd_sample_count = 1000,
                                   std::uint64_t ipd_seed = 0);

}  // namespace adaptts
