#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaptts/distance.hpp"
#include "adaptts/timeseries.hpp"

namespace adaptts {

/// Channelwise distances between the paired series of one source domain
/// and the target domain: row n holds the K per-channel distances of the
/// n-th pair.
struct DifferenceSet {
  std::string source_name;
  Eigen::MatrixXd vectors;  // N x K, entries >= 0

  Eigen::Index count() const { return vectors.rows(); }
  Eigen::Index channels() const { return vectors.cols(); }
};

/// Gaussian-kernel KDE over difference vectors with diagonal bandwidth.
struct KdeModel {
  Eigen::MatrixXd centers;        // N x K
  Eigen::VectorXd bandwidth_diag; // K, entries > 0 (the diagonal of H)

  Eigen::Index count() const { return centers.rows(); }
  Eigen::Index channels() const { return centers.cols(); }
};

struct IpdEstimate {
  std::string source_name;
  Eigen::MatrixXd samples;  // m x K
  double g = 0.0;
  Eigen::Index sample_count() const { return samples.rows(); }
};

struct DomainWeights {
  Eigen::VectorXd alphas;   // Q entries, sums to 1
  std::vector<int> order;   // source indices, g descending (ties by index)
};

struct IpdReport {
  std::vector<IpdEstimate> estimates;
  DomainWeights weights;
  std::vector<Eigen::VectorXd> bandwidth_diags;
  std::string metric_name;
  int sample_count = 0;
  std::uint64_t seed = 0;
  bool uniform_fallback = false;

  void save(const std::filesystem::path& file) const;
  static IpdReport load(const std::filesystem::path& file);
};

/// Channelwise univariate distances over every pair of series (same index
/// in source and target). Inputs must be paired: equal N, K, T.
DifferenceSet empirical_difference(const DomainDataset& source,
                                   const DomainDataset& target,
                                   const DistanceMetric& metric);

inline constexpr double kBandwidthFloor = 1e-6;

/// Diagonal Silverman rule-of-thumb bandwidth:
///   factor_k = (4/(K+2))^(1/(K+4)) * N^(-1/(K+4)) * sigma_k,
///   H_kk = factor_k^2,
/// with sigma_k the sample standard deviation of channel k. Degenerate
/// channels (sigma_k = 0) fall back to kBandwidthFloor. Requires N >= 2.
KdeModel fit_kde(const DifferenceSet& diffs);

/// Mixture density at x.
double kde_density(const KdeModel& model, const Eigen::VectorXd& x);

/// Smooth-bootstrap draw: each row picks a center uniformly and adds
/// zero-mean Gaussian noise with covariance H. Deterministic per seed.
Eigen::MatrixXd sample_kde(const KdeModel& model, int m, std::uint64_t seed);

/// g = Frobenius norm of the m x K sample matrix divided by m.
IpdEstimate ipd_estimate(const KdeModel& model, int m, std::uint64_t seed,
                         const std::string& source_name = {});

/// alpha_q = g_q / sum_l g_l; order sorts g non-increasingly, ties broken
/// by original index. All-zero g throws DegenerateSimilarityError unless
/// uniform_fallback is set, in which case alphas are 1/Q and the order is
/// the input order.
DomainWeights domain_weights(const std::vector<IpdEstimate>& estimates,
                             bool uniform_fallback = false);

/// Source names sorted by g ascending (most influential first).
std::vector<std::string> rank_influential(const std::vector<IpdEstimate>& estimates);

struct IpdOptions {
  DistanceMetric metric;
  int sample_count = 1000;
  std::uint64_t seed = 0;
  bool uniform_fallback = false;
};

/// Full similarity pipeline over all source domains of the dataset.
IpdReport compute_ipd(const PairedMultiSourceDataset& dataset,
                      const IpdOptions& opts);

}  // namespace adaptts
