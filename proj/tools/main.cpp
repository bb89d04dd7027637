#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "adaptts/eval.hpp"
#include "adaptts/rng.hpp"
#include "adaptts/similarity.hpp"
#include "adaptts/timeseries.hpp"
#include "adaptts/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adaptts;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIngestion = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitDegenerate = 5;

struct OutputLock {
  fs::path path;
  explicit OutputLock(const fs::path& dir) : path(dir / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(path))
      throw ConfigError("output directory " + dir.string() +
                        " is locked by another run (remove " + path.string() +
                        " if stale)");
    std::ofstream lock(path);
    lock << "locked\n";
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

json load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse failure: " + std::string(e.what()));
  }
  return j;
}

json resolve_defaults(json cfg) {
  // defaults mirror the reproduction hyperparameters
  if (!cfg.contains("distance")) cfg["distance"] = "dtw";
  if (!cfg.contains("pretrain")) cfg["pretrain"] = json::object();
  auto& pre = cfg["pretrain"];
  if (!pre.contains("lambda0")) pre["lambda0"] = 5e-4;
  if (!pre.contains("epochs")) pre["epochs"] = 50;
  if (!cfg.contains("finetune")) cfg["finetune"] = json::object();
  auto& fine = cfg["finetune"];
  if (!fine.contains("lambda_target")) fine["lambda_target"] = 1e-3;
  if (!fine.contains("max_epochs")) fine["max_epochs"] = 100;
  if (!fine.contains("k_folds")) fine["k_folds"] = 10;
  if (!fine.contains("max_degenerations")) fine["max_degenerations"] = 5;
  if (!fine.contains("lr_floor")) fine["lr_floor"] = 1e-6;
  if (!cfg.contains("hidden")) cfg["hidden"] = 32;
  if (!cfg.contains("init")) cfg["init"] = "paper";
  if (!cfg.contains("strategies")) cfg["strategies"] = json::array({"adaptive"});
  if (!cfg.contains("repetitions")) cfg["repetitions"] = 15;
  if (!cfg.contains("noise_ratios")) cfg["noise_ratios"] = json::array({0.0});
  if (!cfg.contains("noise_sweep"))
    cfg["noise_sweep"] = json::array({0.0, 0.1, 0.2, 0.3, 0.4, 0.5});
  if (!cfg.contains("train_subject_count")) cfg["train_subject_count"] = 6;
  if (!cfg.contains("ipd_samples")) cfg["ipd_samples"] = 1000;
  if (!cfg.contains("seed")) cfg["seed"] = 0;
  if (!cfg.contains("output_dir")) cfg["output_dir"] = "out";
  if (!cfg.contains("uniform_fallback")) cfg["uniform_fallback"] = false;
  return cfg;
}

BenchmarkSpec parse_benchmark_spec(const json& j) {
  BenchmarkSpec spec;
  spec.domains = j.value("domains", spec.domains);
  spec.channels = j.value("channels", spec.channels);
  spec.length = j.value("length", spec.length);
  spec.series_per_label = j.value("series_per_label", spec.series_per_label);
  spec.label_count = j.value("label_count", spec.label_count);
  spec.subject_count = j.value("subject_count", spec.subject_count);
  spec.target_noise = j.value("target_noise", spec.target_noise);
  if (j.contains("source_corruption"))
    spec.source_corruption = j["source_corruption"].get<std::vector<double>>();
  return spec;
}

PairedMultiSourceDataset load_dataset(const json& cfg) {
  const auto& d = cfg.at("dataset");
  const std::string kind = d.at("kind").get<std::string>();
  PairedMultiSourceDataset ds;
  if (kind == "dsa") {
    ds = load_dsa_directory(d.at("path").get<std::string>());
  } else if (kind == "generic") {
    ds = load_generic(d.at("path").get<std::string>());
  } else if (kind == "synthetic") {
    ds = synthesize_benchmark(parse_benchmark_spec(d.value("spec", json::object())),
                              cfg.value("seed", std::uint64_t{0}));
  } else if (kind == "cache") {
    ds = load_cache(d.at("path").get<std::string>());
  } else {
    throw ConfigError("unknown dataset kind: " + kind);
  }
  if (cfg.contains("target_domain")) {
    const std::string want = cfg["target_domain"].get<std::string>();
    bool found = false;
    for (std::size_t v = 0; v < ds.domains.size(); ++v)
      if (ds.domains[v].name == want) {
        ds.target_index = static_cast<int>(v);
        found = true;
      }
    if (!found) throw ConfigError("target domain '" + want + "' not in dataset");
  }
  return ds;
}

fs::path cache_path(const json& cfg) {
  return fs::path(cfg.at("output_dir").get<std::string>()) / "dataset.cache";
}

PairedMultiSourceDataset load_cached_or_fresh(const json& cfg) {
  const fs::path cache = cache_path(cfg);
  if (fs::exists(cache)) return load_cache(cache);
  return rescale_minmax(load_dataset(cfg));
}

void write_manifest(const json& cfg, const std::string& command) {
  json m = cfg;
  m["command"] = command;
  const fs::path dir = cfg.at("output_dir").get<std::string>();
  fs::create_directories(dir);
  std::ofstream out(dir / "run_manifest.json");
  out << m.dump(2) << '\n';
}

DistanceMetric metric_from(const json& cfg) {
  std::optional<int> window;
  if (cfg.contains("dtw_window")) window = cfg["dtw_window"].get<int>();
  return DistanceMetric::parse(cfg.at("distance").get<std::string>(), window);
}

PretrainConfig pretrain_from(const json& cfg) {
  PretrainConfig p;
  p.lambda0 = cfg["pretrain"]["lambda0"].get<double>();
  p.epochs = cfg["pretrain"]["epochs"].get<int>();
  p.seed = derive_seed(cfg["seed"].get<std::uint64_t>(), 1);
  return p;
}

FinetuneConfig finetune_from(const json& cfg) {
  FinetuneConfig f;
  f.lambda_target = cfg["finetune"]["lambda_target"].get<double>();
  f.max_epochs = cfg["finetune"]["max_epochs"].get<int>();
  f.k_folds = cfg["finetune"]["k_folds"].get<int>();
  f.max_degenerations = cfg["finetune"]["max_degenerations"].get<int>();
  f.lr_floor = cfg["finetune"]["lr_floor"].get<double>();
  f.seed = derive_seed(cfg["seed"].get<std::uint64_t>(), 2);
  return f;
}

void print_summary(const PairedMultiSourceDataset& ds) {
  std::printf("V=%zu Q=%zu N=%zu K=%d T=%d target=%s\n", ds.num_domains(),
              ds.num_domains() - 1, ds.num_series(), ds.channels(), ds.length(),
              ds.target().name.c_str());
  std::map<Label, int> hist;
  for (Label c : ds.labels) ++hist[c];
  std::printf("labels:");
  for (const auto& [label, count] : hist) std::printf(" %d:%d", label, count);
  std::printf("\n");
}

int cmd_ingest(const json& cfg) {
  OutputLock lock(cfg.at("output_dir").get<std::string>());
  write_manifest(cfg, "ingest");
  PairedMultiSourceDataset ds = rescale_minmax(load_dataset(cfg));
  print_summary(ds);
  save_cache(ds, cache_path(cfg));
  std::printf("cached %s\n", cache_path(cfg).string().c_str());
  return 0;
}

int cmd_ipd(const json& cfg) {
  OutputLock lock(cfg.at("output_dir").get<std::string>());
  write_manifest(cfg, "ipd");
  PairedMultiSourceDataset ds = load_cached_or_fresh(cfg);
  IpdOptions opts{metric_from(cfg), cfg["ipd_samples"].get<int>(),
                  derive_seed(cfg["seed"].get<std::uint64_t>(), 3),
                  cfg["uniform_fallback"].get<bool>()};
  IpdReport report = compute_ipd(ds, opts);
  const fs::path out = fs::path(cfg.at("output_dir").get<std::string>()) / "ipd_report.json";
  report.save(out);
  std::printf("%-16s %-12s %-12s\n", "source", "g", "alpha");
  for (std::size_t i = 0; i < report.estimates.size(); ++i)
    std::printf("%-16s %-12.6g %-12.6g\n", report.estimates[i].source_name.c_str(),
                report.estimates[i].g,
                report.weights.alphas(static_cast<Eigen::Index>(i)));
  auto ranking = rank_influential(report.estimates);
  std::printf("most influential:");
  for (const auto& name : ranking) std::printf(" %s", name.c_str());
  std::printf("\nwrote %s\n", out.string().c_str());
  return 0;
}

int cmd_train(const json& cfg) {
  OutputLock lock(cfg.at("output_dir").get<std::string>());
  write_manifest(cfg, "train");
  PairedMultiSourceDataset ds = load_cached_or_fresh(cfg);
  const Strategy strategy =
      parse_strategy(cfg["strategies"].at(0).get<std::string>());

  Architecture arch;
  arch.channels = ds.channels();
  arch.length = ds.length();
  arch.hidden = cfg["hidden"].get<int>();
  arch.label_count = ds.num_labels();
  const InitScheme scheme = cfg["init"].get<std::string>() == "symmetric"
                                ? InitScheme::Symmetric
                                : InitScheme::UniformZeroOne;
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  ClassifierState init = init_classifier(arch, derive_seed(seed, 0x717), scheme);

  PipelineResult result = train_full_pipeline(
      ds, metric_from(cfg), pretrain_from(cfg), finetune_from(cfg), strategy,
      init, cfg["ipd_samples"].get<int>(), derive_seed(seed, 3));

  const fs::path dir = cfg.at("output_dir").get<std::string>();
  if (result.pretrained)
    save_checkpoint(*result.pretrained, dir / "checkpoint_pretrain.json");
  save_checkpoint(result.model, dir / "checkpoint_final.json");
  result.trace.save_csv(dir / "trace.csv");
  if (result.ipd) result.ipd->save(dir / "ipd_report.json");
  std::printf("strategy=%s trace_rows=%zu final_loss=%.6g\n",
              strategy_name(strategy).c_str(), result.trace.rows.size(),
              result.trace.rows.empty() ? 0.0 : result.trace.rows.back().loss);
  return 0;
}

int run_reports(const json& cfg, const std::vector<double>& ratios,
                const std::string& command, const std::string& out_name) {
  OutputLock lock(cfg.at("output_dir").get<std::string>());
  write_manifest(cfg, command);
  PairedMultiSourceDataset ds = load_cached_or_fresh(cfg);

  ExperimentConfig ex;
  for (const auto& s : cfg["strategies"])
    ex.strategies.push_back(parse_strategy(s.get<std::string>()));
  ex.metric = metric_from(cfg);
  ex.pretrain = pretrain_from(cfg);
  ex.finetune = finetune_from(cfg);
  ex.arch.hidden = cfg["hidden"].get<int>();
  ex.repetitions = cfg["repetitions"].get<int>();
  ex.noise_ratios = ratios;
  ex.train_subject_count = cfg["train_subject_count"].get<int>();
  ex.ipd_sample_count = cfg["ipd_samples"].get<int>();
  ex.master_seed = cfg["seed"].get<std::uint64_t>();
  ex.init_scheme = cfg["init"].get<std::string>() == "symmetric"
                       ? InitScheme::Symmetric
                       : InitScheme::UniformZeroOne;

  auto reports = run_experiment(ds, ex);
  const fs::path out = fs::path(cfg.at("output_dir").get<std::string>()) / out_name;
  save_reports_csv(reports, out);
  for (const auto& r : reports)
    std::printf("%-22s noise=%.2f mean=%.4f std=%.4f\n", r.strategy.c_str(),
                r.noise_ratio, r.mean_rcc(), r.std_rcc());
  std::printf("wrote %s\n", out.string().c_str());
  return 0;
}

int cmd_synth(const json& cfg) {
  OutputLock lock(cfg.at("output_dir").get<std::string>());
  write_manifest(cfg, "synth");
  BenchmarkSpec spec = parse_benchmark_spec(
      cfg.contains("dataset") ? cfg["dataset"].value("spec", json::object())
                              : json::object());
  PairedMultiSourceDataset ds =
      synthesize_benchmark(spec, cfg["seed"].get<std::uint64_t>());
  const fs::path dir =
      fs::path(cfg.at("output_dir").get<std::string>()) / "synthetic";
  save_generic(ds, dir);
  print_summary(ds);
  std::printf("wrote %s\n", (dir / "manifest.json").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive transfer learning for paired multi-source motion sensor data"};
  app.require_subcommand(1);

  std::string config_file;
  std::string output_override, distance_override, strategy_override, target_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> repetitions_override;
  app.add_option("-c,--config", config_file, "JSON run configuration");
  app.add_option("--output", output_override, "override output_dir");
  app.add_option("--distance", distance_override, "override distance metric");
  app.add_option("--strategy", strategy_override, "override strategy list with one strategy");
  app.add_option("--target", target_override, "override target domain name");
  app.add_option("--seed", seed_override, "override master seed");
  app.add_option("--repetitions", repetitions_override, "override repetition count");

  auto* ingest = app.add_subcommand("ingest", "load, normalize and cache a dataset");
  auto* ipd = app.add_subcommand("ipd", "compute per-source IPD, weights and ranking");
  auto* train = app.add_subcommand("train", "run one training strategy end to end");
  auto* evaluate = app.add_subcommand("evaluate", "repetition harness with RCC reports");
  auto* sweep = app.add_subcommand("noise-sweep", "evaluate across noise ratios");
  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  // global flags may appear after the subcommand name
  for (auto* sub : {ingest, ipd, train, evaluate, sweep, synth})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = config_file.empty() ? json::object() : load_config(config_file);
    cfg = resolve_defaults(cfg);
    if (!output_override.empty()) cfg["output_dir"] = output_override;
    if (!distance_override.empty()) cfg["distance"] = distance_override;
    if (!strategy_override.empty()) cfg["strategies"] = json::array({strategy_override});
    if (!target_override.empty()) cfg["target_domain"] = target_override;
    if (seed_override) cfg["seed"] = *seed_override;
    if (repetitions_override) cfg["repetitions"] = *repetitions_override;

    if (ingest->parsed()) return cmd_ingest(cfg);
    if (ipd->parsed()) return cmd_ipd(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed())
      return run_reports(cfg, cfg["noise_ratios"].get<std::vector<double>>(),
                         "evaluate", "reports.csv");
    if (sweep->parsed())
      return run_reports(cfg, cfg["noise_sweep"].get<std::vector<double>>(),
                         "noise-sweep", "noise_sweep.csv");
    if (synth->parsed()) return cmd_synth(cfg);
    return kExitConfig;
  } catch (const DegenerateSimilarityError& e) {
    std::cerr << "degenerate similarity: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IngestionError& e) {
    std::cerr << "ingestion error: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const PairingError& e) {
    std::cerr << "pairing violation: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
