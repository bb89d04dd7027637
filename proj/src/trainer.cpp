#include "adaptts/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "adaptts/rng.hpp"

namespace adaptts {

void TrainingTrace::save_csv(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw IngestionError("cannot write trace " + file.string());
  out << "phase,domain,epoch,lr,loss,fold,degenerations\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.phase << ',' << r.domain << ',' << r.epoch << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.lr);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.loss);
    out << buf << ',' << r.fold << ',' << r.degenerations << '\n';
  }
}

std::vector<TraceRow> TrainingTrace::phase_rows(const std::string& phase) const {
  std::vector<TraceRow> out;
  for (const auto& r : rows)
    if (r.phase == phase) out.push_back(r);
  return out;
}

namespace {

std::pair<ClassifierState, TrainingTrace> pretrain_in_order(
    const PairedMultiSourceDataset& dataset, const DomainWeights& weights,
    const std::vector<int>& order, const ClassifierState& model,
    const PretrainConfig& cfg) {
  if (cfg.lambda0 <= 0.0) throw ConfigError("pretrain: lambda0 must be positive");
  if (cfg.epochs < 1) throw ConfigError("pretrain: epochs must be >= 1");

  const auto sources = dataset.source_indices();
  if (order.size() != sources.size())
    throw ConfigError("pretrain: weight order does not cover all source domains");

  ClassifierState state = model;
  TrainingTrace trace;
  for (int qi : order) {
    const int domain_index = sources.at(qi);
    const auto& domain = dataset.domains.at(domain_index);
    const Batch batch = make_batch(domain, dataset.labels);
    const double alpha = weights.alphas(qi);
    double lr = cfg.lambda0;
    for (int j = 0; j < cfg.epochs; ++j) {
      double l;
      Eigen::VectorXd grad;
      loss_and_gradient(state, batch, l, grad);
      if (!std::isfinite(l))
        throw NumericError("pretrain: non-finite loss in domain '" +
                           domain.name + "' epoch " + std::to_string(j));
      trace.rows.push_back({"pretrain", domain.name, j, lr, l, -1, 0});
      state = step(state, grad, lr);
      lr *= (1.0 - alpha);
    }
  }
  return {std::move(state), std::move(trace)};
}

}  // namespace

std::pair<ClassifierState, TrainingTrace> pretrain(
    const PairedMultiSourceDataset& dataset, const DomainWeights& weights,
    const ClassifierState& model, const PretrainConfig& cfg) {
  if (weights.order.empty()) return {model, {}};
  return pretrain_in_order(dataset, weights, weights.order, model, cfg);
}

std::pair<ClassifierState, TrainingTrace> pretrain_random_order(
    const PairedMultiSourceDataset& dataset, const DomainWeights& weights,
    const ClassifierState& model, const PretrainConfig& cfg,
    std::uint64_t order_seed) {
  if (weights.order.empty()) return {model, {}};
  std::vector<int> order(weights.order.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(order_seed, 0x0d3a);
  std::shuffle(order.begin(), order.end(), rng);
  return pretrain_in_order(dataset, weights, order, model, cfg);
}

std::vector<std::vector<int>> make_folds(int n, int k, std::uint64_t seed) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed, 0xf07d);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<int>> folds(k);
  for (int i = 0; i < n; ++i) folds[i % k].push_back(perm[i]);
  return folds;
}

std::pair<ClassifierState, TrainingTrace> finetune(
    const DomainDataset& target, const std::vector<Label>& labels,
    const ClassifierState& model, const FinetuneConfig& cfg,
    const ValidationLossHook& val_loss_hook) {
  if (cfg.k_folds < 2) throw ConfigError("finetune: k_folds must be >= 2");
  if (cfg.max_degenerations < 1) throw ConfigError("finetune: R must be >= 1");
  if (cfg.lambda_target <= 0.0) throw ConfigError("finetune: lambda_target must be positive");
  const int n = static_cast<int>(target.size());
  if (n < cfg.k_folds)
    throw PairingError("finetune: " + std::to_string(n) + " examples cannot fill " +
                       std::to_string(cfg.k_folds) + " folds");

  // Fixed seeded partition; fold selection below is per epoch.
  const auto folds = make_folds(n, cfg.k_folds, cfg.seed);
  auto rng = make_rng(cfg.seed, 0x5e1c);
  std::uniform_int_distribution<int> pick_fold(0, cfg.k_folds - 1);

  ClassifierState state = model;
  TrainingTrace trace;
  double prev_lr = cfg.lambda_target;
  int degenerations = 0;
  for (int j = 0; j < cfg.max_epochs; ++j) {
    const int fold = pick_fold(rng);
    Batch train_batch, val_batch;
    for (int f = 0; f < cfg.k_folds; ++f)
      for (int i : folds[f])
        (f == fold ? val_batch : train_batch).push_back({&target.series[i], labels[i]});

    double val_loss = loss(state, val_batch);
    if (val_loss_hook) val_loss = val_loss_hook(j, val_loss);
    const double lr = std::clamp((1.0 - val_loss) * cfg.lambda_target,
                                 cfg.lr_floor, cfg.lambda_target);
    if (lr > prev_lr)
      ++degenerations;
    else
      degenerations = 0;

    double train_loss;
    Eigen::VectorXd grad;
    loss_and_gradient(state, train_batch, train_loss, grad);
    if (!std::isfinite(train_loss))
      throw NumericError("finetune: non-finite loss at epoch " + std::to_string(j));
    trace.rows.push_back({"finetune", target.name, j, lr, train_loss, fold, degenerations});
    state = step(state, grad, lr);
    prev_lr = lr;
    if (degenerations >= cfg.max_degenerations) break;
  }
  return {std::move(state), std::move(trace)};
}

Strategy parse_strategy(const std::string& name) {
  if (name == "adaptive") return Strategy::Adaptive;
  if (name == "no_transfer") return Strategy::NoTransfer;
  if (name == "direct_transfer") return Strategy::DirectTransfer;
  if (name == "no_pairing") return Strategy::NoPairing;
  if (name == "adaptive_random_order") return Strategy::AdaptiveRandomOrder;
  if (name == "adaptive_top2") return Strategy::AdaptiveTop2;
  throw ConfigError("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Adaptive: return "adaptive";
    case Strategy::NoTransfer: return "no_transfer";
    case Strategy::DirectTransfer: return "direct_transfer";
    case Strategy::NoPairing: return "no_pairing";
    case Strategy::AdaptiveRandomOrder: return "adaptive_random_order";
    case Strategy::AdaptiveTop2: return "adaptive_top2";
  }
  throw ConfigError("unknown strategy enum");
}

namespace {

// Breaks the index pairing for the no_pairing baseline: the target
// series are re-paired against a random permutation before the distance
// computation.
IpdReport compute_ipd_unpaired(const PairedMultiSourceDataset& dataset,
                               const IpdOptions& opts, std::uint64_t seed) {
  PairedMultiSourceDataset shuffled = dataset;
  std::vector<int> perm(dataset.num_series());
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(seed, 0x9a17);
  std::shuffle(perm.begin(), perm.end(), rng);
  DomainDataset& tgt = shuffled.domains[shuffled.target_index];
  DomainDataset reordered = tgt;
  for (std::size_t i = 0; i < perm.size(); ++i)
    reordered.series[i] = tgt.series[perm[i]];
  tgt = std::move(reordered);
  return compute_ipd(shuffled, opts);
}

}  // namespace

PipelineResult train_full_pipeline(const PairedMultiSourceDataset& dataset,
                                   const DistanceMetric& metric,
                                   const PretrainConfig& pre_cfg,
                                   const FinetuneConfig& fine_cfg,
                                   Strategy strategy,
                                   const ClassifierState& init,
                                   int ipd_sample_count,
                                   std::uint64_t ipd_seed) {
  dataset.validate();
  PipelineResult result;
  result.model = init;

  IpdOptions ipd_opts{metric, ipd_sample_count, ipd_seed, false};
  const auto sources = dataset.source_indices();
  const int q = static_cast<int>(sources.size());

  if (strategy != Strategy::NoTransfer && q > 0) {
    DomainWeights weights;
    const PairedMultiSourceDataset* pretrain_data = &dataset;
    PairedMultiSourceDataset restricted;

    switch (strategy) {
      case Strategy::DirectTransfer: {
        weights.alphas = Eigen::VectorXd::Constant(q, 1.0 / q);
        weights.order.resize(q);
        std::iota(weights.order.begin(), weights.order.end(), 0);
        break;
      }
      case Strategy::NoPairing: {
        result.ipd = compute_ipd_unpaired(dataset, ipd_opts, ipd_seed);
        weights = result.ipd->weights;
        break;
      }
      case Strategy::AdaptiveTop2: {
        result.ipd = compute_ipd(dataset, ipd_opts);
        // keep the two smallest-g sources, renormalizing alpha over them
        auto ranking = result.ipd->weights.order;  // descending g
        std::vector<int> keep(ranking.end() - std::min<std::size_t>(2, ranking.size()),
                              ranking.end());
        std::sort(keep.begin(), keep.end());
        restricted.target_index = 0;
        restricted.labels = dataset.labels;
        restricted.subject_ids = dataset.subject_ids;
        restricted.domains.push_back(dataset.target());
        std::vector<IpdEstimate> kept;
        for (int qi : keep) {
          restricted.domains.push_back(dataset.domains[sources[qi]]);
          kept.push_back(result.ipd->estimates[qi]);
        }
        weights = domain_weights(kept);
        restricted.validate();
        pretrain_data = &restricted;
        break;
      }
      default: {
        result.ipd = compute_ipd(dataset, ipd_opts);
        weights = result.ipd->weights;
        break;
      }
    }

    auto [state, pre_trace] =
        strategy == Strategy::AdaptiveRandomOrder
            ? pretrain_random_order(*pretrain_data, weights, result.model,
                                    pre_cfg, pre_cfg.seed)
            : pretrain(*pretrain_data, weights, result.model, pre_cfg);
    result.model = std::move(state);
    result.pretrained = result.model;
    result.trace.rows.insert(result.trace.rows.end(), pre_trace.rows.begin(),
                             pre_trace.rows.end());
  }

  auto [state, fine_trace] =
      finetune(dataset.target(), dataset.labels, result.model, fine_cfg);
  result.model = std::move(state);
  result.trace.rows.insert(result.trace.rows.end(), fine_trace.rows.begin(),
                           fine_trace.rows.end());
  return result;
}

}  // namespace adaptts
