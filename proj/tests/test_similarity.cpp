#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "adaptts/similarity.hpp"

using namespace adaptts;

namespace {

DomainDataset make_domain(const std::string& name,
                          const std::vector<TimeSeries>& series) {
  DomainDataset d;
  d.name = name;
  d.series = series;
  return d;
}

// Independent mixture-sum oracle for the KDE density.
double mixture_density(const KdeModel& m, const Eigen::VectorXd& x) {
  const Eigen::Index k = m.channels();
  double det = 1.0;
  for (Eigen::Index ch = 0; ch < k; ++ch) det *= m.bandwidth_diag(ch);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.count(); ++i) {
    double quad = 0.0;
    for (Eigen::Index ch = 0; ch < k; ++ch) {
      const double d = x(ch) - m.centers(i, ch);
      quad += d * d / m.bandwidth_diag(ch);
    }
    acc += std::pow(2.0 * M_PI, -0.5 * k) / std::sqrt(det) * std::exp(-0.5 * quad);
  }
  return acc / static_cast<double>(m.count());
}

IpdEstimate fake_estimate(const std::string& name, double g) {
  IpdEstimate e;
  e.source_name = name;
  e.g = g;
  return e;
}

}  // namespace

TEST_CASE("empirical difference of a domain with itself is zero") {
  std::vector<TimeSeries> series;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int n = 0; n < 5; ++n) {
    TimeSeries s(3, 7);
    for (auto& v : s.reshaped()) v = g(rng);
    series.push_back(s);
  }
  auto d = make_domain("d", series);
  for (auto kind : {MetricKind::Euclidean, MetricKind::Dtw}) {
    auto diffs = empirical_difference(d, d, {kind, std::nullopt});
    CHECK(diffs.vectors.rows() == 5);
    CHECK(diffs.vectors.cols() == 3);
    CHECK(diffs.vectors.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("empirical difference channelwise values") {
  TimeSeries a(2, 2), b(2, 2);
  a << 0, 0, 1, 1;
  b << 3, 4, 1, 1;
  auto diffs = empirical_difference(make_domain("s", {a}), make_domain("t", {b}),
                                    {MetricKind::Euclidean, std::nullopt});
  CHECK(diffs.vectors(0, 0) == doctest::Approx(5.0));
  CHECK(diffs.vectors(0, 1) == 0.0);
}

TEST_CASE("empirical difference entries match independent single calls") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<TimeSeries> src, tgt;
  for (int n = 0; n < 10; ++n) {
    TimeSeries a(9, 20), b(9, 20);
    for (auto& v : a.reshaped()) v = g(rng);
    for (auto& v : b.reshaped()) v = g(rng);
    src.push_back(a);
    tgt.push_back(b);
  }
  DistanceMetric dtw{MetricKind::Dtw, std::nullopt};
  auto diffs = empirical_difference(make_domain("s", src), make_domain("t", tgt), dtw);
  for (int n = 0; n < 10; ++n)
    for (int k = 0; k < 9; ++k) {
      CHECK(diffs.vectors(n, k) >= 0.0);
      CHECK(diffs.vectors(n, k) ==
            doctest::Approx(distance(dtw, src[n].row(k), tgt[n].row(k))));
    }
}

TEST_CASE("empirical difference rejects unpaired domains") {
  TimeSeries s(2, 3);
  s.setZero();
  auto a = make_domain("a", {s, s});
  auto b = make_domain("b", {s});
  CHECK_THROWS_AS(
      empirical_difference(a, b, {MetricKind::Euclidean, std::nullopt}),
      PairingError);
}

TEST_CASE("silverman bandwidth, K=1 hand computation") {
  DifferenceSet diffs;
  diffs.vectors.resize(2, 1);
  diffs.vectors << 0.0, 2.0;
  auto model = fit_kde(diffs);
  const double sigma = std::sqrt(2.0);  // sample std of {0, 2}
  const double factor =
      std::pow(4.0 / 3.0, 0.2) * std::pow(2.0, -0.2) * sigma;
  CHECK(model.bandwidth_diag(0) == doctest::Approx(factor * factor).epsilon(1e-12));
}

TEST_CASE("identical centers fall back to the bandwidth floor") {
  DifferenceSet diffs;
  diffs.vectors = Eigen::MatrixXd::Constant(4, 3, 1.5);
  auto model = fit_kde(diffs);
  for (int k = 0; k < 3; ++k) CHECK(model.bandwidth_diag(k) == kBandwidthFloor);
}

TEST_CASE("fit_kde needs at least two vectors") {
  DifferenceSet diffs;
  diffs.vectors.resize(1, 2);
  diffs.vectors.setZero();
  CHECK_THROWS_AS(fit_kde(diffs), std::domain_error);
}

TEST_CASE("density equals the direct mixture sum") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  DifferenceSet diffs;
  diffs.vectors = Eigen::MatrixXd::NullaryExpr(6, 2, [&] { return std::abs(g(rng)); });
  auto model = fit_kde(diffs);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd x(2);
    x << g(rng), g(rng);
    CHECK(kde_density(model, x) ==
          doctest::Approx(mixture_density(model, x)).epsilon(1e-10));
  }
}

TEST_CASE("kde integrates to one on a wide grid, K=1") {
  DifferenceSet diffs;
  diffs.vectors.resize(3, 1);
  diffs.vectors << 0.5, 1.0, 2.5;
  auto model = fit_kde(diffs);
  const double lo = -20.0, hi = 25.0;
  const int steps = 20000;
  const double h = (hi - lo) / steps;
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    Eigen::VectorXd x(1);
    x << lo + i * h;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    integral += w * kde_density(model, x) * h;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sampling is deterministic per seed") {
  KdeModel m;
  m.centers.resize(3, 2);
  m.centers << 0, 1, 2, 3, 4, 5;
  m.bandwidth_diag = Eigen::VectorXd::Constant(2, 0.25);
  auto a = sample_kde(m, 50, 123);
  auto b = sample_kde(m, 50, 123);
  auto c = sample_kde(m, 50, 124);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("near-degenerate kernel reproduces its single center") {
  KdeModel m;
  m.centers = Eigen::MatrixXd::Constant(1, 3, 2.5);
  m.bandwidth_diag = Eigen::VectorXd::Constant(3, kBandwidthFloor);
  auto s = sample_kde(m, 200, 7);
  CHECK((s.array() - 2.5).abs().maxCoeff() <= 5.0 * std::sqrt(kBandwidthFloor));
}

TEST_CASE("sample moments match the mixture, K=1") {
  KdeModel m;
  m.centers.resize(2, 1);
  m.centers << -1.0, 1.0;
  m.bandwidth_diag = Eigen::VectorXd::Constant(1, 0.09);
  const int n = 10000;
  auto s = sample_kde(m, n, 77);
  const double mean = s.mean();
  const double var = (s.array() - mean).square().sum() / n;
  CHECK(std::abs(mean) < 0.05);
  // mixture variance = center variance (=1) + H
  CHECK(var == doctest::Approx(1.0 + 0.09).epsilon(0.10));
}

TEST_CASE("ipd estimate recomputes from its samples") {
  KdeModel m;
  m.centers.resize(4, 2);
  m.centers << 1, 0, 0, 1, 2, 2, 3, 1;
  m.bandwidth_diag = Eigen::VectorXd::Constant(2, 0.5);
  auto est = ipd_estimate(m, 100, 5, "s");
  CHECK(est.g == doctest::Approx(est.samples.norm() / 100.0).epsilon(1e-12));
  CHECK(est.g > 0.0);
}

TEST_CASE("frobenius norm on a hand-built matrix") {
  IpdEstimate est;
  est.samples.resize(2, 2);
  est.samples << 1, 0, 0, 1;
  est.g = est.samples.norm() / 2.0;
  CHECK(est.g == doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("identical paired domains leave only bandwidth noise in g") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  std::vector<TimeSeries> series;
  for (int n = 0; n < 8; ++n) {
    TimeSeries s(2, 10);
    for (auto& v : s.reshaped()) v = g(rng);
    series.push_back(s);
  }
  auto d = make_domain("d", series);
  auto diffs = empirical_difference(d, d, {MetricKind::Euclidean, std::nullopt});
  auto model = fit_kde(diffs);
  auto est = ipd_estimate(model, 1000, 3, "d");
  CHECK(est.g <= 2.0 * std::sqrt(2.0 * kBandwidthFloor));
}

TEST_CASE("domain weights") {
  SUBCASE("g = (3,1)") {
    auto w = domain_weights({fake_estimate("a", 3), fake_estimate("b", 1)});
    CHECK(w.alphas(0) == doctest::Approx(0.75));
    CHECK(w.alphas(1) == doctest::Approx(0.25));
    CHECK(w.order == std::vector<int>{0, 1});
  }
  SUBCASE("g = (1,1,2)") {
    auto w = domain_weights(
        {fake_estimate("a", 1), fake_estimate("b", 1), fake_estimate("c", 2)});
    CHECK(w.alphas(0) == doctest::Approx(0.25));
    CHECK(w.alphas(2) == doctest::Approx(0.5));
    CHECK(w.order == std::vector<int>{2, 0, 1});
  }
  SUBCASE("single source") {
    auto w = domain_weights({fake_estimate("a", 7)});
    CHECK(w.alphas(0) == doctest::Approx(1.0));
    CHECK(w.order == std::vector<int>{0});
  }
  SUBCASE("all-zero g") {
    CHECK_THROWS_AS(domain_weights({fake_estimate("a", 0), fake_estimate("b", 0)}),
                    DegenerateSimilarityError);
    auto w = domain_weights({fake_estimate("a", 0), fake_estimate("b", 0)}, true);
    CHECK(w.alphas(0) == doctest::Approx(0.5));
    CHECK(w.alphas(1) == doctest::Approx(0.5));
  }
}

TEST_CASE("weights lie on the simplex") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<IpdEstimate> est;
    const int q = 1 + static_cast<int>(u(rng));
    for (int i = 0; i < q; ++i) est.push_back(fake_estimate("s", u(rng) + 0.01));
    auto w = domain_weights(est);
    CHECK(w.alphas.minCoeff() >= 0.0);
    CHECK(w.alphas.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("influence ranking is ascending in g with stable ties") {
  auto names = rank_influential(
      {fake_estimate("source0", 3), fake_estimate("source1", 1),
       fake_estimate("source2", 2)});
  CHECK(names == std::vector<std::string>{"source1", "source2", "source0"});

  auto tied = rank_influential({fake_estimate("a", 1), fake_estimate("b", 1)});
  CHECK(tied == std::vector<std::string>{"a", "b"});
}

TEST_CASE("scale covariance of the euclidean difference pipeline") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  std::vector<TimeSeries> src, tgt;
  for (int n = 0; n < 4; ++n) {
    TimeSeries a(2, 6), b(2, 6);
    for (auto& v : a.reshaped()) v = g(rng);
    for (auto& v : b.reshaped()) v = g(rng);
    src.push_back(a);
    tgt.push_back(b);
  }
  const double c = 3.5;
  std::vector<TimeSeries> src_scaled, tgt_scaled;
  for (const auto& s : src) src_scaled.push_back(c * s);
  for (const auto& s : tgt) tgt_scaled.push_back(c * s);

  DistanceMetric euc{MetricKind::Euclidean, std::nullopt};
  auto base = empirical_difference(make_domain("s", src), make_domain("t", tgt), euc);
  auto scaled = empirical_difference(make_domain("s", src_scaled),
                                     make_domain("t", tgt_scaled), euc);
  CHECK((scaled.vectors - c * base.vectors).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("sampler second moment matches the closed form, K=1") {
  KdeModel m;
  m.centers.resize(4, 1);
  m.centers << 0.2, 0.8, 1.4, 2.0;
  m.bandwidth_diag = Eigen::VectorXd::Constant(1, 0.04);
  const int n = 20000;
  auto s = sample_kde(m, n, 13);
  const double expect =
      (m.centers.array().square() + m.bandwidth_diag(0)).mean();
  const double emp = s.array().square().mean();
  // E X^4 for each component bounds the variance of X^2; 3 standard errors
  double fourth = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double mu = m.centers(i, 0), h = m.bandwidth_diag(0);
    fourth += mu * mu * mu * mu + 6.0 * mu * mu * h + 3.0 * h * h;
  }
  fourth /= 4.0;
  const double se = std::sqrt((fourth - expect * expect) / n);
  CHECK(std::abs(emp - expect) <= 3.0 * se);
}

TEST_CASE("permutation equivariance of the pipeline outputs") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> g;
  PairedMultiSourceDataset ds;
  ds.target_index = 0;
  for (int v = 0; v < 4; ++v) {
    DomainDataset d;
    d.name = v == 0 ? "target" : "s" + std::to_string(v);
    for (int n = 0; n < 6; ++n) {
      TimeSeries s(2, 8);
      for (auto& val : s.reshaped()) val = g(rng) * (1 + v);
      d.series.push_back(s);
    }
    ds.domains.push_back(d);
  }
  ds.labels = {0, 1, 0, 1, 0, 1};
  ds.subject_ids = {"a", "a", "b", "b", "c", "c"};

  PairedMultiSourceDataset permuted = ds;
  std::swap(permuted.domains[1], permuted.domains[3]);

  IpdOptions opts{{MetricKind::Euclidean, std::nullopt}, 500, 9, false};
  auto r1 = compute_ipd(ds, opts);
  auto r2 = compute_ipd(permuted, opts);
  // per-domain g is invariant; only the positions swap
  CHECK(r1.estimates[0].g == doctest::Approx(r2.estimates[2].g));
  CHECK(r1.estimates[2].g == doctest::Approx(r2.estimates[0].g));
  CHECK(r1.estimates[1].g == doctest::Approx(r2.estimates[1].g));
  CHECK(rank_influential(r1.estimates) == rank_influential(r2.estimates));
}

TEST_CASE("ipd report round trip") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g;
  PairedMultiSourceDataset ds;
  ds.target_index = 0;
  for (int v = 0; v < 3; ++v) {
    DomainDataset d;
    d.name = v == 0 ? "target" : "s" + std::to_string(v);
    for (int n = 0; n < 5; ++n) {
      TimeSeries s(2, 8);
      for (auto& val : s.reshaped()) val = g(rng) * (1 + v);
      d.series.push_back(s);
    }
    ds.domains.push_back(d);
  }
  ds.labels = {0, 1, 0, 1, 0};
  ds.subject_ids = {"a", "a", "b", "b", "c"};

  IpdOptions opts{{MetricKind::Euclidean, std::nullopt}, 200, 3, false};
  auto report = compute_ipd(ds, opts);
  auto file = std::filesystem::temp_directory_path() / "adaptts_ipd_report.json";
  report.save(file);
  auto back = IpdReport::load(file);
  REQUIRE(back.estimates.size() == report.estimates.size());
  for (std::size_t i = 0; i < report.estimates.size(); ++i) {
    CHECK(back.estimates[i].g == report.estimates[i].g);
    CHECK(back.estimates[i].source_name == report.estimates[i].source_name);
  }
  CHECK(back.weights.order == report.weights.order);
}
