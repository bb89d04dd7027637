#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "adaptts/errors.hpp"

namespace adaptts {

enum class MetricKind { Euclidean, Dtw };

struct DistanceMetric {
  MetricKind kind = MetricKind::Dtw;
  std::optional<int> dtw_window;  // Sakoe-Chiba band half-width

  static DistanceMetric parse(const std::string& name,
                              std::optional<int> window = std::nullopt);
  std::string name() const {
    return kind == MetricKind::Euclidean ? "euclidean" : "dtw";
  }
};

template <typename DerivedA, typename DerivedB>
double euclidean_distance(const Eigen::MatrixBase<DerivedA>& a,
                          const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() == 0 || b.size() == 0)
    throw std::domain_error("euclidean_distance: empty input");
  if (a.size() != b.size())
    throw std::domain_error("euclidean_distance: length mismatch");
  double d = (a.derived().template cast<double>() -
              b.derived().template cast<double>())
                 .norm();
  if (std::isnan(d)) throw std::domain_error("euclidean_distance: NaN input");
  return d;
}

/// Classic DTW with per-step cost |a_i - b_j|, steps {(1,0),(0,1),(1,1)},
/// boundary-to-boundary alignment. Inputs may have different lengths.
/// An optional Sakoe-Chiba band restricts |i - j| <= window.
template <typename DerivedA, typename DerivedB>
double dtw_distance(const Eigen::MatrixBase<DerivedA>& a,
                    const Eigen::MatrixBase<DerivedB>& b,
                    std::optional<int> window = std::nullopt) {
  const Eigen::Index na = a.size();
  const Eigen::Index nb = b.size();
  if (na == 0 || nb == 0) throw std::domain_error("dtw_distance: empty input");
  if (a.hasNaN() || b.hasNaN()) throw std::domain_error("dtw_distance: NaN input");

  const double inf = std::numeric_limits<double>::infinity();
  // Two-row dynamic program over the cost lattice.
  Eigen::VectorXd prev = Eigen::VectorXd::Constant(nb, inf);
  Eigen::VectorXd curr = Eigen::VectorXd::Constant(nb, inf);
  const Eigen::Index band =
      window ? static_cast<Eigen::Index>(*window) + std::abs(na - nb)
             : std::max(na, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    curr.setConstant(inf);
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - band);
    const Eigen::Index hi = std::min(nb - 1, i + band);
    for (Eigen::Index j = lo; j <= hi; ++j) {
      const double cost = std::abs(static_cast<double>(a(i)) -
                                   static_cast<double>(b(j)));
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = prev(j);  // (1,0)
        if (j > 0) best = std::min(best, curr(j - 1));  // (0,1)
        if (j > 0) best = std::min(best, prev(j - 1));  // (1,1)
      }
      curr(j) = cost + best;
    }
    prev.swap(curr);
  }
  return prev(nb - 1);
}

template <typename DerivedA, typename DerivedB>
double distance(const DistanceMetric& metric,
                const Eigen::MatrixBase<DerivedA>& a,
                const Eigen::MatrixBase<DerivedB>& b) {
  switch (metric.kind) {
    case MetricKind::Euclidean:
      return euclidean_distance(a, b);
    case MetricKind::Dtw:
      return dtw_distance(a, b, metric.dtw_window);
  }
  throw ConfigError("distance: unknown metric");
}

inline DistanceMetric DistanceMetric::parse(const std::string& name,
                                            std::optional<int> window) {
  DistanceMetric m;
  if (name == "euclidean") {
    m.kind = MetricKind::Euclidean;
  } else if (name == "dtw") {
    m.kind = MetricKind::Dtw;
    m.dtw_window = window;
  } else {
    throw ConfigError("unknown distance metric: " + name);
  }
  return m;
}

}  // namespace adaptts
