#include "adaptts/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "adaptts/rng.hpp"

using nlohmann::json;

namespace adaptts {

DifferenceSet empirical_difference(const DomainDataset& source,
                                   const DomainDataset& target,
                                   const DistanceMetric& metric) {
  if (source.size() != target.size())
    throw PairingError("empirical_difference: source has " +
                       std::to_string(source.size()) + " series, target " +
                       std::to_string(target.size()));
  if (source.size() == 0)
    throw PairingError("empirical_difference: empty domains");
  if (source.channels() != target.channels() || source.length() != target.length())
    throw PairingError("empirical_difference: source/target shape mismatch");

  const Eigen::Index n = static_cast<Eigen::Index>(source.size());
  const Eigen::Index k = source.channels();
  DifferenceSet out;
  out.source_name = source.name;
  out.vectors.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index ch = 0; ch < k; ++ch)
      out.vectors(i, ch) = distance(metric, source.series[i].row(ch),
                                    target.series[i].row(ch));
  return out;
}

KdeModel fit_kde(const DifferenceSet& diffs) {
  const Eigen::Index n = diffs.count();
  const Eigen::Index k = diffs.channels();
  if (n < 2)
    throw std::domain_error("fit_kde: need at least 2 difference vectors");

  KdeModel model;
  model.centers = diffs.vectors;
  model.bandwidth_diag.resize(k);
  const double dk = static_cast<double>(k);
  const double silverman =
      std::pow(4.0 / (dk + 2.0), 1.0 / (dk + 4.0)) *
      std::pow(static_cast<double>(n), -1.0 / (dk + 4.0));
  for (Eigen::Index ch = 0; ch < k; ++ch) {
    const double mean = diffs.vectors.col(ch).mean();
    const double var =
        (diffs.vectors.col(ch).array() - mean).square().sum() /
        static_cast<double>(n - 1);
    const double sigma = std::sqrt(var);
    const double factor = silverman * sigma;
    model.bandwidth_diag(ch) = sigma > 0.0 ? factor * factor : kBandwidthFloor;
  }
  return model;
}

double kde_density(const KdeModel& model, const Eigen::VectorXd& x) {
  const Eigen::Index n = model.count();
  const Eigen::Index k = model.channels();
  const double log_det = model.bandwidth_diag.array().log().sum();
  const double norm_const =
      std::exp(-0.5 * (k * std::log(2.0 * M_PI) + log_det));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd d = x - model.centers.row(i).transpose();
    const double quad = (d.array().square() / model.bandwidth_diag.array()).sum();
    acc += std::exp(-0.5 * quad);
  }
  return acc * norm_const / static_cast<double>(n);
}

Eigen::MatrixXd sample_kde(const KdeModel& model, int m, std::uint64_t seed) {
  if (m < 1) throw std::domain_error("sample_kde: m must be positive");
  auto rng = make_rng(seed, 0x5a3d);
  std::uniform_int_distribution<Eigen::Index> pick(0, model.count() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::VectorXd scale = model.bandwidth_diag.array().sqrt();
  Eigen::MatrixXd out(m, model.channels());
  for (int i = 0; i < m; ++i) {
    const Eigen::Index c = pick(rng);
    for (Eigen::Index ch = 0; ch < model.channels(); ++ch)
      out(i, ch) = model.centers(c, ch) + scale(ch) * gauss(rng);
  }
  return out;
}

IpdEstimate ipd_estimate(const KdeModel& model, int m, std::uint64_t seed,
                         const std::string& source_name) {
  IpdEstimate est;
  est.source_name = source_name;
  est.samples = sample_kde(model, m, seed);
  est.g = est.samples.norm() / static_cast<double>(m);
  return est;
}

DomainWeights domain_weights(const std::vector<IpdEstimate>& estimates,
                             bool uniform_fallback) {
  const int q = static_cast<int>(estimates.size());
  if (q < 1) throw std::domain_error("domain_weights: no estimates");

  DomainWeights w;
  w.order.resize(q);
  std::iota(w.order.begin(), w.order.end(), 0);

  double total = 0.0;
  for (const auto& e : estimates) total += e.g;
  if (total == 0.0) {
    if (!uniform_fallback)
      throw DegenerateSimilarityError(
          "all IPD estimates are zero; the source domains are "
          "indistinguishable from the target (enable the uniform-weight "
          "fallback to proceed with alpha = 1/Q)");
    w.alphas = Eigen::VectorXd::Constant(q, 1.0 / q);
    return w;
  }

  w.alphas.resize(q);
  for (int i = 0; i < q; ++i) w.alphas(i) = estimates[i].g / total;
  std::stable_sort(w.order.begin(), w.order.end(), [&](int a, int b) {
    return estimates[a].g > estimates[b].g;
  });
  return w;
}

std::vector<std::string> rank_influential(const std::vector<IpdEstimate>& estimates) {
  std::vector<int> idx(estimates.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return estimates[a].g < estimates[b].g;
  });
  std::vector<std::string> names;
  names.reserve(idx.size());
  for (int i : idx) names.push_back(estimates[i].source_name);
  return names;
}

namespace {

// FNV-1a; ties each source's sample stream to the domain name so that
// permuting the source list permutes the estimates identically.
std::uint64_t name_stream(const std::string& name) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

IpdReport compute_ipd(const PairedMultiSourceDataset& dataset,
                      const IpdOptions& opts) {
  dataset.validate();
  IpdReport report;
  report.metric_name = opts.metric.name();
  report.sample_count = opts.sample_count;
  report.seed = opts.seed;

  const auto sources = dataset.source_indices();
  for (std::size_t qi = 0; qi < sources.size(); ++qi) {
    const auto& src = dataset.domains[sources[qi]];
    DifferenceSet diffs = empirical_difference(src, dataset.target(), opts.metric);
    KdeModel kde = fit_kde(diffs);
    report.bandwidth_diags.push_back(kde.bandwidth_diag);
    if (diffs.vectors.cwiseAbs().maxCoeff() == 0.0) {
      // the source is indistinguishable from the target; without this
      // shortcut the floor-bandwidth sampling noise would mask g = 0
      IpdEstimate est;
      est.source_name = src.name;
      est.samples = Eigen::MatrixXd::Zero(opts.sample_count, diffs.channels());
      report.estimates.push_back(std::move(est));
    } else {
      // one independently derived stream per source domain
      report.estimates.push_back(ipd_estimate(
          kde, opts.sample_count, derive_seed(opts.seed, name_stream(src.name)),
          src.name));
    }
  }
  report.weights = domain_weights(report.estimates, opts.uniform_fallback);
  report.uniform_fallback = opts.uniform_fallback;
  return report;
}

void IpdReport::save(const std::filesystem::path& file) const {
  json j;
  j["metric"] = metric_name;
  j["sample_count"] = sample_count;
  j["seed"] = seed;
  j["uniform_fallback"] = uniform_fallback;
  j["sources"] = json::array();
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    json s;
    s["name"] = estimates[i].source_name;
    s["g"] = estimates[i].g;
    s["alpha"] = weights.alphas(static_cast<Eigen::Index>(i));
    s["bandwidth_diag"] =
        std::vector<double>(bandwidth_diags[i].data(),
                            bandwidth_diags[i].data() + bandwidth_diags[i].size());
    j["sources"].push_back(std::move(s));
  }
  j["order"] = weights.order;
  j["ranking"] = rank_influential(estimates);
  std::ofstream out(file);
  if (!out) throw IngestionError("cannot write IPD report " + file.string());
  out << j.dump(2) << '\n';
}

IpdReport IpdReport::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open IPD report " + file.string());
  json j;
  in >> j;
  IpdReport r;
  r.metric_name = j.at("metric").get<std::string>();
  r.sample_count = j.at("sample_count").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.uniform_fallback = j.value("uniform_fallback", false);
  const auto& sources = j.at("sources");
  r.weights.alphas.resize(sources.size());
  Eigen::Index i = 0;
  for (const auto& s : sources) {
    IpdEstimate e;
    e.source_name = s.at("name").get<std::string>();
    e.g = s.at("g").get<double>();
    r.estimates.push_back(std::move(e));
    auto bw = s.at("bandwidth_diag").get<std::vector<double>>();
    r.bandwidth_diags.push_back(
        Eigen::Map<Eigen::VectorXd>(bw.data(), static_cast<Eigen::Index>(bw.size())));
    r.weights.alphas(i++) = s.at("alpha").get<double>();
  }
  r.weights.order = j.at("order").get<std::vector<int>>();
  return r;
}

}  // namespace adaptts
