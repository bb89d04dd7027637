#include "adaptts/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "adaptts/rng.hpp"

namespace adaptts {

double EvaluationReport::mean_rcc() const {
  if (rcc_values.empty()) return 0.0;
  return std::accumulate(rcc_values.begin(), rcc_values.end(), 0.0) /
         static_cast<double>(rcc_values.size());
}

double EvaluationReport::std_rcc() const {
  if (rcc_values.size() < 2) return 0.0;
  const double m = mean_rcc();
  double acc = 0.0;
  for (double v : rcc_values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(rcc_values.size() - 1));
}

void save_reports_csv(const std::vector<EvaluationReport>& reports,
                      const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IngestionError("cannot write report " + file.string());
  out << "strategy,distance,noise_ratio,repetition,rcc,mean_rcc,std_rcc\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.rcc_values.size(); ++i)
      out << r.strategy << ',' << r.distance << ',' << num(r.noise_ratio) << ','
          << i << ',' << num(r.rcc_values[i]) << ',' << num(r.mean_rcc()) << ','
          << num(r.std_rcc()) << '\n';
}

double rcc(const ClassifierState& model, const Batch& test) {
  if (test.empty()) throw std::domain_error("rcc: empty test set");
  int correct = 0;
  for (const auto& ex : test)
    if (predict_label(model, *ex.series) == ex.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

namespace {

std::vector<int> indices_with(const std::vector<Label>& labels, Label value,
                              bool equal) {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if ((labels[i] == value) == equal) out.push_back(static_cast<int>(i));
  return out;
}

PairedMultiSourceDataset relabel_binary(PairedMultiSourceDataset ds,
                                        Label positive) {
  for (auto& c : ds.labels) c = (c == positive) ? 1 : 0;
  return ds;
}

}  // namespace

BinaryTask make_binary_task(const PairedMultiSourceDataset& train,
                            const PairedMultiSourceDataset& test,
                            Label positive_label, std::uint64_t seed) {
  const auto train_pos = indices_with(train.labels, positive_label, true);
  const auto train_neg = indices_with(train.labels, positive_label, false);
  const auto test_pos = indices_with(test.labels, positive_label, true);
  const auto test_neg = indices_with(test.labels, positive_label, false);
  if (train_pos.empty() || test_pos.empty())
    throw std::domain_error("make_binary_task: no positive examples for label " +
                            std::to_string(positive_label));

  auto rng = make_rng(seed, 0xb17a);

  // Train: bootstrap positives up to the negative count.
  std::vector<int> train_idx = train_neg;
  if (!train_neg.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, train_pos.size() - 1);
    for (std::size_t i = 0; i < train_neg.size(); ++i)
      train_idx.push_back(train_pos[pick(rng)]);
  } else {
    train_idx = train_pos;
  }

  // Test: subsample negatives without replacement down to the positive count.
  std::vector<int> neg_pool = test_neg;
  std::shuffle(neg_pool.begin(), neg_pool.end(), rng);
  if (neg_pool.size() > test_pos.size()) neg_pool.resize(test_pos.size());
  std::vector<int> test_idx = test_pos;
  test_idx.insert(test_idx.end(), neg_pool.begin(), neg_pool.end());

  BinaryTask task;
  task.train = relabel_binary(train.select(train_idx), positive_label);
  task.test = relabel_binary(test.select(test_idx), positive_label);
  return task;
}

TimeSeries inject_noise(const TimeSeries& series, double ratio,
                        std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0)
    throw std::domain_error("inject_noise: ratio must be in [0,1]");
  const int t = static_cast<int>(series.cols());
  const int count = static_cast<int>(std::floor(ratio * t));
  if (count == 0) return series;

  auto rng = make_rng(seed, 0x0153);
  std::vector<int> cols(t);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TimeSeries out = series;
  for (int i = 0; i < count; ++i) {
    const int c = cols[i];
    for (Eigen::Index ch = 0; ch < out.rows(); ++ch) {
      // N(0, 0.02*Diag{x_t}); |x| keeps the variance nonnegative
      const double sd = std::sqrt(0.02 * std::abs(series(ch, c)));
      out(ch, c) += sd * gauss(rng);
    }
  }
  return out;
}

PairedMultiSourceDataset synthesize_benchmark(const BenchmarkSpec& spec,
                                              std::uint64_t seed) {
  if (spec.domains < 2 || spec.channels < 1 || spec.length < 2 ||
      spec.series_per_label < 1 || spec.label_count < 1 ||
      spec.subject_count < 2)
    throw ConfigError("synthesize_benchmark: invalid generator parameters");
  if (static_cast<int>(spec.source_corruption.size()) != spec.domains - 1)
    throw ConfigError("synthesize_benchmark: need one corruption level per source domain");

  auto rng = make_rng(seed, 0x5e7b);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = spec.series_per_label * spec.label_count;
  const int t = spec.length;
  const int k = spec.channels;

  PairedMultiSourceDataset ds;
  ds.target_index = 0;
  ds.domains.resize(spec.domains);
  ds.domains[0].name = "target";
  for (int q = 1; q < spec.domains; ++q)
    ds.domains[q].name = "source" + std::to_string(q - 1);

  for (int label = 0; label < spec.label_count; ++label) {
    for (int rep = 0; rep < spec.series_per_label; ++rep) {
      // label-dependent sinusoid template with per-series jitter
      TimeSeries tgt(k, t);
      const double phase_jitter = 0.3 * gauss(rng);
      for (int ch = 0; ch < k; ++ch) {
        const double freq = 1.0 + label + 0.5 * ch;
        const double phase = 0.7 * label + 0.4 * ch + phase_jitter;
        for (int ti = 0; ti < t; ++ti) {
          const double x = 2.0 * M_PI * freq * ti / t + phase;
          tgt(ch, ti) = std::sin(x) + spec.target_noise * gauss(rng);
        }
      }
      ds.domains[0].series.push_back(tgt);

      for (int q = 1; q < spec.domains; ++q) {
        const double corruption = spec.source_corruption[q - 1];
        TimeSeries src(k, t);
        for (int ch = 0; ch < k; ++ch) {
          const double scale = 1.0 + 0.15 * ch + 0.1 * q;
          for (int ti = 0; ti < t; ++ti) {
            // deterministic smooth time warp, stronger for later sources
            const double u = static_cast<double>(ti) / (t - 1);
            const double warped = u + 0.08 * q * std::sin(M_PI * u);
            const double pos = std::min(warped, 1.0) * (t - 1);
            const int lo = static_cast<int>(pos);
            const int hi = std::min(lo + 1, t - 1);
            const double frac = pos - lo;
            const double v = (1.0 - frac) * tgt(ch, lo) + frac * tgt(ch, hi);
            src(ch, ti) = scale * v + corruption * gauss(rng);
          }
        }
        ds.domains[q].series.push_back(std::move(src));
      }

      ds.labels.push_back(label);
      const int idx = static_cast<int>(ds.labels.size()) - 1;
      ds.subject_ids.push_back("p" + std::to_string(idx % spec.subject_count + 1));
    }
  }
  ds.validate();
  return ds;
}

std::vector<EvaluationReport> run_experiment(
    const PairedMultiSourceDataset& dataset, const ExperimentConfig& cfg) {
  dataset.validate();
  if (cfg.strategies.empty()) throw ConfigError("run_experiment: no strategies");
  if (cfg.repetitions < 1) throw ConfigError("run_experiment: repetitions must be >= 1");

  std::vector<EvaluationReport> reports;
  for (Strategy s : cfg.strategies)
    for (double ratio : cfg.noise_ratios) {
      EvaluationReport r;
      r.strategy = strategy_name(s);
      r.distance = cfg.metric.name();
      r.noise_ratio = ratio;
      reports.push_back(std::move(r));
    }

  const int label_count = dataset.num_labels();

  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.master_seed, rep);
    auto rep_rng = make_rng(rep_seed, 0xe8b);
    std::uniform_int_distribution<int> pick_label(0, label_count - 1);
    const Label positive = pick_label(rep_rng);

    SubjectSplit split =
        split_random_subjects(dataset, cfg.train_subject_count, rep_seed);
    PairedMultiSourceDataset train = rescale_minmax(split.train, split.train);
    PairedMultiSourceDataset test = rescale_minmax(split.validation, split.train);
    BinaryTask task = make_binary_task(train, test, positive, rep_seed);

    Architecture arch = cfg.arch;
    arch.channels = dataset.channels();
    arch.length = dataset.length();
    arch.label_count = 2;
    const ClassifierState init =
        init_classifier(arch, derive_seed(rep_seed, 0x717), cfg.init_scheme);

    PretrainConfig pre = cfg.pretrain;
    pre.seed = derive_seed(rep_seed, 1);
    FinetuneConfig fine = cfg.finetune;
    fine.seed = derive_seed(rep_seed, 2);

    std::size_t slot = 0;
    for (Strategy s : cfg.strategies) {
      PipelineResult result =
          train_full_pipeline(task.train, cfg.metric, pre, fine, s, init,
                              cfg.ipd_sample_count, derive_seed(rep_seed, 3));
      const DomainDataset& tgt = task.test.target();
      for (double ratio : cfg.noise_ratios) {
        Batch test_batch;
        std::vector<TimeSeries> noisy;
        noisy.reserve(tgt.size());
        for (std::size_t i = 0; i < tgt.size(); ++i)
          noisy.push_back(
              inject_noise(tgt.series[i], ratio, derive_seed(rep_seed, 100 + i)));
        for (std::size_t i = 0; i < noisy.size(); ++i)
          test_batch.push_back({&noisy[i], task.test.labels[i]});
        reports[slot].rcc_values.push_back(rcc(result.model, test_batch));
        reports[slot].seeds.push_back(rep_seed);
        ++slot;
      }
    }
  }
  return reports;
}

}  // namespace adaptts
