#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "adaptts/timeseries.hpp"

namespace fs = std::filesystem;
using namespace adaptts;

namespace {

fs::path make_temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("adaptts_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_dsa_segment(const fs::path& file, int rows, double base) {
  std::ofstream out(file);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 45; ++c) {
      out << base + r * 0.01 + c;
      if (c + 1 < 45) out << ',';
    }
    out << '\n';
  }
}

PairedMultiSourceDataset tiny_dataset() {
  // 2 domains, 4 series, K=2, T=3, 2 subjects
  PairedMultiSourceDataset ds;
  ds.target_index = 0;
  for (int v = 0; v < 2; ++v) {
    DomainDataset d;
    d.name = "d" + std::to_string(v);
    for (int n = 0; n < 4; ++n) {
      TimeSeries s(2, 3);
      s << 0, 5, 10, -2, 0, 2;
      s.array() += v * 0.5 + n * 0.125;
      d.series.push_back(s);
    }
    ds.domains.push_back(d);
  }
  ds.labels = {0, 1, 0, 1};
  ds.subject_ids = {"p1", "p1", "p2", "p2"};
  return ds;
}

}  // namespace

TEST_CASE("dsa loader on a miniature tree") {
  const fs::path root = make_temp_dir("dsa");
  for (const char* act : {"a01", "a02"}) {
    fs::create_directories(root / act / "p1");
    write_dsa_segment(root / act / "p1" / "s01.txt", 125,
                      act[2] == '1' ? 0.0 : 100.0);
  }

  auto ds = load_dsa_directory(root);
  CHECK(ds.num_domains() == 5);
  CHECK(ds.num_series() == 2);
  CHECK(ds.channels() == 9);
  CHECK(ds.length() == 125);
  CHECK(ds.labels == std::vector<Label>{0, 1});
  CHECK(ds.subject_ids == std::vector<std::string>{"p1", "p1"});
  CHECK(ds.domains[0].name == "torso");
  CHECK(ds.domains[4].name == "left_leg");
  // column grouping: torso holds columns 1-9, transposed
  CHECK(ds.domains[0].series[0](0, 0) == doctest::Approx(0.0));
  CHECK(ds.domains[0].series[0](8, 0) == doctest::Approx(8.0));
  CHECK(ds.domains[1].series[0](0, 0) == doctest::Approx(9.0));
  CHECK(ds.domains[0].series[0](0, 1) == doctest::Approx(0.01));
}

TEST_CASE("dsa loader: single activity/subject/segment tree") {
  const fs::path root = make_temp_dir("dsa_single");
  fs::create_directories(root / "a01" / "p3");
  write_dsa_segment(root / "a01" / "p3" / "s01.txt", 125, 1.0);
  auto ds = load_dsa_directory(root);
  CHECK(ds.num_series() == 1);
  CHECK(ds.labels == std::vector<Label>{0});
  CHECK(ds.subject_ids == std::vector<std::string>{"p3"});
}

TEST_CASE("dsa loader rejects a short segment file") {
  const fs::path root = make_temp_dir("dsa_bad");
  fs::create_directories(root / "a01" / "p1");
  write_dsa_segment(root / "a01" / "p1" / "s01.txt", 124, 0.0);
  CHECK_THROWS_WITH_AS(load_dsa_directory(root),
                       doctest::Contains("s01.txt"), IngestionError);
}

TEST_CASE("dsa loader reports non-numeric cells with position") {
  const fs::path root = make_temp_dir("dsa_nan");
  fs::create_directories(root / "a01" / "p1");
  {
    std::ofstream out(root / "a01" / "p1" / "s01.txt");
    out << "1,2,bogus\n";
  }
  CHECK_THROWS_WITH_AS(load_dsa_directory(root), doctest::Contains("column 3"),
                       IngestionError);
}

TEST_CASE("generic manifest round-trips bit-exactly") {
  auto ds = tiny_dataset();
  // awkward values that need full precision
  ds.domains[0].series[0](0, 0) = 1.0 / 3.0;
  ds.domains[1].series[3](1, 2) = -1e-17;
  const fs::path dir = make_temp_dir("generic");
  save_generic(ds, dir);
  auto back = load_generic(dir / "manifest.json");
  REQUIRE(back.num_domains() == ds.num_domains());
  REQUIRE(back.num_series() == ds.num_series());
  CHECK(back.labels == ds.labels);
  CHECK(back.subject_ids == ds.subject_ids);
  for (std::size_t v = 0; v < ds.domains.size(); ++v)
    for (std::size_t n = 0; n < ds.num_series(); ++n)
      CHECK((back.domains[v].series[n] - ds.domains[v].series[n])
                .cwiseAbs()
                .maxCoeff() == 0.0);
}

TEST_CASE("generic manifest pairing violation") {
  auto ds = tiny_dataset();
  const fs::path dir = make_temp_dir("generic_bad");
  save_generic(ds, dir);
  {
    std::ofstream out(dir / "labels.txt");
    out << "0\n1\n0\n";  // one short
  }
  CHECK_THROWS_AS(load_generic(dir / "manifest.json"), PairingError);
}

TEST_CASE("binary cache round-trips bit-exactly") {
  auto ds = tiny_dataset();
  ds.domains[0].series[2](1, 1) = 0.1 + 0.2;
  const fs::path dir = make_temp_dir("cache");
  save_cache(ds, dir / "d.cache");
  auto back = load_cache(dir / "d.cache");
  CHECK(back.labels == ds.labels);
  for (std::size_t v = 0; v < ds.domains.size(); ++v)
    for (std::size_t n = 0; n < ds.num_series(); ++n)
      CHECK((back.domains[v].series[n] - ds.domains[v].series[n])
                .cwiseAbs()
                .maxCoeff() == 0.0);
}

TEST_CASE("rescale endpoints and constant-channel convention") {
  PairedMultiSourceDataset ds;
  ds.target_index = 0;
  DomainDataset d;
  d.name = "d0";
  TimeSeries s(2, 3);
  s << 0, 5, 10,   // channel 0: maps to -1, 0, 1
       3, 3, 3;    // constant channel: maps to 0
  d.series.push_back(s);
  ds.domains.push_back(d);
  ds.labels = {0};
  ds.subject_ids = {"p1"};

  auto out = rescale_minmax(ds);
  const auto& r = out.domains[0].series[0];
  CHECK(r(0, 0) == doctest::Approx(-1.0));
  CHECK(r(0, 1) == doctest::Approx(0.0));
  CHECK(r(0, 2) == doctest::Approx(1.0));
  CHECK(r(1, 0) == 0.0);
  CHECK(r(1, 1) == 0.0);
  CHECK(r(1, 2) == 0.0);
}

TEST_CASE("rescale handles each channel independently and is idempotent") {
  auto ds = tiny_dataset();
  auto once = rescale_minmax(ds);
  for (const auto& d : once.domains)
    for (const auto& s : d.series) {
      CHECK(s.minCoeff() >= -1.0 - 1e-12);
      CHECK(s.maxCoeff() <= 1.0 + 1e-12);
    }
  auto twice = rescale_minmax(once);
  for (std::size_t v = 0; v < once.domains.size(); ++v)
    for (std::size_t n = 0; n < once.num_series(); ++n)
      CHECK((twice.domains[v].series[n] - once.domains[v].series[n])
                .cwiseAbs()
                .maxCoeff() <= 1e-12);
}

TEST_CASE("rescale with training-split statistics") {
  auto ds = tiny_dataset();
  auto split = split_by_subject(ds, {"p1"});
  auto train = rescale_minmax(split.train, split.train);
  auto val = rescale_minmax(split.validation, split.train);
  for (const auto& d : train.domains)
    for (const auto& s : d.series) {
      CHECK(s.minCoeff() >= -1.0 - 1e-12);
      CHECK(s.maxCoeff() <= 1.0 + 1e-12);
    }
  // validation may exceed [-1,1]: p2 series sit above the p1 range
  CHECK(val.domains[0].series[0].maxCoeff() > 1.0);
}

TEST_CASE("split by subject") {
  auto ds = tiny_dataset();
  auto split = split_by_subject(ds, {"p1"});
  CHECK(split.train.num_series() == 2);
  CHECK(split.validation.num_series() == 2);
  CHECK(split.train.subject_ids == std::vector<std::string>{"p1", "p1"});
  CHECK(split.validation.subject_ids == std::vector<std::string>{"p2", "p2"});
  // pairing preserved: labels follow their series in both partitions
  CHECK(split.train.labels == std::vector<Label>{0, 1});
  CHECK(split.validation.labels == std::vector<Label>{0, 1});
  split.train.validate();
  split.validation.validate();

  CHECK_THROWS_AS(split_by_subject(ds, {"p1", "p2"}), PairingError);
  CHECK_THROWS_AS(split_by_subject(ds, {}), PairingError);
}

TEST_CASE("random subject split is deterministic and complete") {
  auto ds = tiny_dataset();
  auto a = split_random_subjects(ds, 1, 42);
  auto b = split_random_subjects(ds, 1, 42);
  CHECK(a.train.subject_ids == b.train.subject_ids);
  CHECK(a.train.num_series() + a.validation.num_series() == ds.num_series());
}

TEST_CASE("validate rejects broken pairing") {
  auto ds = tiny_dataset();
  ds.domains[1].series.pop_back();
  CHECK_THROWS_AS(ds.validate(), PairingError);
}
