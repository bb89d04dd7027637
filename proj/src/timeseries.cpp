#include "adaptts/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adaptts/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adaptts {

int PairedMultiSourceDataset::num_labels() const {
  int l = 0;
  for (Label c : labels) l = std::max(l, c + 1);
  return l;
}

std::vector<int> PairedMultiSourceDataset::source_indices() const {
  std::vector<int> idx;
  for (int v = 0; v < static_cast<int>(domains.size()); ++v)
    if (v != target_index) idx.push_back(v);
  return idx;
}

void PairedMultiSourceDataset::validate() const {
  if (domains.empty()) throw PairingError("dataset has no domains");
  if (target_index < 0 || target_index >= static_cast<int>(domains.size()))
    throw PairingError("target_index out of range");
  const std::size_t n = labels.size();
  if (n == 0) throw PairingError("dataset has no labels");
  if (subject_ids.size() != n)
    throw PairingError("subject_ids length does not match labels");
  const int k = domains.front().channels();
  const int t = domains.front().length();
  for (const auto& d : domains) {
    if (d.series.size() != n)
      throw PairingError("domain '" + d.name + "' has " +
                         std::to_string(d.series.size()) + " series, labels has " +
                         std::to_string(n));
    for (const auto& s : d.series) {
      if (s.rows() != k || s.cols() != t)
        throw PairingError("domain '" + d.name + "' has mismatched series shape");
      if (!s.allFinite())
        throw PairingError("domain '" + d.name + "' contains non-finite values");
    }
  }
}

PairedMultiSourceDataset PairedMultiSourceDataset::select(
    const std::vector<int>& indices) const {
  PairedMultiSourceDataset out;
  out.target_index = target_index;
  out.domains.reserve(domains.size());
  for (const auto& d : domains) {
    DomainDataset nd;
    nd.name = d.name;
    nd.series.reserve(indices.size());
    for (int i : indices) nd.series.push_back(d.series.at(i));
    out.domains.push_back(std::move(nd));
  }
  out.labels.reserve(indices.size());
  out.subject_ids.reserve(indices.size());
  for (int i : indices) {
    out.labels.push_back(labels.at(i));
    out.subject_ids.push_back(subject_ids.at(i));
  }
  return out;
}

namespace {

std::vector<double> parse_csv_line(const std::string& line,
                                   const std::string& context, int row) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  int col = 0;
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    char* next = nullptr;
    double v = std::strtod(p, &next);
    if (next == p)
      throw IngestionError(context + ": non-numeric cell at row " +
                           std::to_string(row + 1) + " column " +
                           std::to_string(col + 1));
    out.push_back(v);
    p = next;
    ++col;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p < end) {
      if (*p != ',')
        throw IngestionError(context + ": expected ',' at row " +
                             std::to_string(row + 1));
      ++p;
    }
  }
  return out;
}

Eigen::MatrixXd read_csv_matrix(const fs::path& file, int expect_rows,
                                int expect_cols) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open " + file.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int r = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(parse_csv_line(line, file.string(), r));
    ++r;
  }
  if (rows.empty()) throw IngestionError(file.string() + ": empty file");
  const int cols = static_cast<int>(rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (static_cast<int>(rows[i].size()) != cols)
      throw IngestionError(file.string() + ": ragged row " + std::to_string(i + 1));
  if (expect_rows > 0 && static_cast<int>(rows.size()) != expect_rows)
    throw IngestionError(file.string() + ": expected " +
                         std::to_string(expect_rows) + " rows, found " +
                         std::to_string(rows.size()));
  if (expect_cols > 0 && cols != expect_cols)
    throw IngestionError(file.string() + ": expected " +
                         std::to_string(expect_cols) + " columns, found " +
                         std::to_string(cols));
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  return m;
}

void write_csv_matrix(const Eigen::MatrixXd& m, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IngestionError("cannot write " + file.string());
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      // %.17g round-trips doubles bit-exactly through strtod
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
}

}  // namespace

PairedMultiSourceDataset load_dsa_directory(const fs::path& root) {
  static const char* kUnitNames[5] = {"torso", "right_arm", "left_arm",
                                      "right_leg", "left_leg"};
  constexpr int kRows = 125, kCols = 45, kUnits = 5, kChannels = 9;

  PairedMultiSourceDataset ds;
  ds.domains.resize(kUnits);
  for (int u = 0; u < kUnits; ++u) ds.domains[u].name = kUnitNames[u];
  ds.target_index = 0;

  if (!fs::is_directory(root))
    throw IngestionError("DSA root not found: " + root.string());

  std::vector<fs::path> activities;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && name.size() == 3 && name[0] == 'a')
      activities.push_back(e.path());
  }
  std::sort(activities.begin(), activities.end());
  if (activities.empty())
    throw IngestionError("no activity directories aXX under " + root.string());

  for (std::size_t ai = 0; ai < activities.size(); ++ai) {
    std::vector<fs::path> subjects;
    for (const auto& e : fs::directory_iterator(activities[ai]))
      if (e.is_directory() && e.path().filename().string()[0] == 'p')
        subjects.push_back(e.path());
    std::sort(subjects.begin(), subjects.end());
    if (subjects.empty())
      throw IngestionError("no subject directories under " +
                           activities[ai].string());
    for (const auto& subj : subjects) {
      std::vector<fs::path> segments;
      for (const auto& e : fs::directory_iterator(subj))
        if (e.is_regular_file()) segments.push_back(e.path());
      std::sort(segments.begin(), segments.end());
      if (segments.empty())
        throw IngestionError("no segment files under " + subj.string());
      for (const auto& seg : segments) {
        Eigen::MatrixXd raw = read_csv_matrix(seg, kRows, kCols);
        for (int u = 0; u < kUnits; ++u) {
          // columns are grouped 9 per body unit; transpose to channels x time
          TimeSeries s = raw.middleCols(u * kChannels, kChannels).transpose();
          ds.domains[u].series.push_back(std::move(s));
        }
        ds.labels.push_back(static_cast<Label>(ai));
        ds.subject_ids.push_back(subj.filename().string());
      }
    }
  }
  ds.validate();
  return ds;
}

PairedMultiSourceDataset load_generic(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IngestionError("cannot open manifest " + manifest.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IngestionError("manifest parse failure in " + manifest.string() +
                         ": " + e.what());
  }
  const fs::path base = manifest.parent_path();

  PairedMultiSourceDataset ds;
  ds.target_index = j.value("target_index", 0);

  std::vector<Label> labels;
  {
    const fs::path lf = base / j.at("labels_file").get<std::string>();
    std::ifstream lin(lf);
    if (!lin) throw IngestionError("cannot open label file " + lf.string());
    int v;
    while (lin >> v) labels.push_back(v);
  }
  std::vector<std::string> subjects;
  {
    const fs::path sf = base / j.at("subjects_file").get<std::string>();
    std::ifstream sin(sf);
    if (!sin) throw IngestionError("cannot open subject file " + sf.string());
    std::string tok;
    while (sin >> tok) subjects.push_back(tok);
  }

  for (const auto& dj : j.at("domains")) {
    DomainDataset d;
    d.name = dj.at("name").get<std::string>();
    for (const auto& f : dj.at("files"))
      d.series.push_back(read_csv_matrix(base / f.get<std::string>(), 0, 0));
    if (d.series.size() != labels.size())
      throw PairingError("domain '" + d.name + "' lists " +
                         std::to_string(d.series.size()) + " series but " +
                         std::to_string(labels.size()) + " labels were given");
    ds.domains.push_back(std::move(d));
  }
  ds.labels = std::move(labels);
  ds.subject_ids = std::move(subjects);
  ds.validate();
  return ds;
}

void save_generic(const PairedMultiSourceDataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["target_index"] = dataset.target_index;
  j["labels_file"] = "labels.txt";
  j["subjects_file"] = "subjects.txt";
  j["domains"] = json::array();
  for (std::size_t v = 0; v < dataset.domains.size(); ++v) {
    const auto& d = dataset.domains[v];
    const std::string dname = "d" + std::to_string(v);
    fs::create_directories(dir / dname);
    json dj;
    dj["name"] = d.name;
    dj["files"] = json::array();
    for (std::size_t n = 0; n < d.series.size(); ++n) {
      const std::string rel = dname + "/s" + std::to_string(n) + ".csv";
      write_csv_matrix(d.series[n], dir / rel);
      dj["files"].push_back(rel);
    }
    j["domains"].push_back(std::move(dj));
  }
  {
    std::ofstream out(dir / "labels.txt");
    for (Label c : dataset.labels) out << c << '\n';
  }
  {
    std::ofstream out(dir / "subjects.txt");
    for (const auto& s : dataset.subject_ids) out << s << '\n';
  }
  std::ofstream out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

namespace {
constexpr std::uint64_t kCacheMagic = 0x4144505454534331ULL;  // "ADPTTSC1"

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <typename T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
}
void put_string(std::ofstream& out, const std::string& s) {
  put(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::ifstream& in) {
  std::uint64_t n = 0;
  get(in, n);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
}  // namespace

void save_cache(const PairedMultiSourceDataset& dataset, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IngestionError("cannot write cache " + file.string());
  put(out, kCacheMagic);
  put(out, static_cast<std::uint64_t>(dataset.domains.size()));
  put(out, static_cast<std::uint64_t>(dataset.labels.size()));
  put(out, static_cast<std::int64_t>(dataset.channels()));
  put(out, static_cast<std::int64_t>(dataset.length()));
  put(out, static_cast<std::int64_t>(dataset.target_index));
  for (const auto& d : dataset.domains) put_string(out, d.name);
  for (Label c : dataset.labels) put(out, static_cast<std::int32_t>(c));
  for (const auto& s : dataset.subject_ids) put_string(out, s);
  for (const auto& d : dataset.domains)
    for (const auto& s : d.series)
      out.write(reinterpret_cast<const char*>(s.data()),
                static_cast<std::streamsize>(sizeof(double) * s.size()));
}

PairedMultiSourceDataset load_cache(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError("cannot open cache " + file.string());
  std::uint64_t magic = 0, nd = 0, ns = 0;
  std::int64_t k = 0, t = 0, target = 0;
  get(in, magic);
  if (magic != kCacheMagic)
    throw IngestionError(file.string() + " is not a dataset cache");
  get(in, nd);
  get(in, ns);
  get(in, k);
  get(in, t);
  get(in, target);
  PairedMultiSourceDataset ds;
  ds.target_index = static_cast<int>(target);
  ds.domains.resize(nd);
  for (auto& d : ds.domains) d.name = get_string(in);
  ds.labels.resize(ns);
  for (auto& c : ds.labels) {
    std::int32_t v = 0;
    get(in, v);
    c = v;
  }
  ds.subject_ids.resize(ns);
  for (auto& s : ds.subject_ids) s = get_string(in);
  for (auto& d : ds.domains) {
    d.series.resize(ns);
    for (auto& s : d.series) {
      s.resize(k, t);
      in.read(reinterpret_cast<char*>(s.data()),
              static_cast<std::streamsize>(sizeof(double) * s.size()));
    }
  }
  if (!in) throw IngestionError("truncated cache " + file.string());
  ds.validate();
  return ds;
}

namespace {

// Per-domain, per-channel min/max over every series of the stats dataset.
struct ChannelRange {
  Eigen::VectorXd lo, hi;
};

std::vector<ChannelRange> channel_ranges(const PairedMultiSourceDataset& ds) {
  std::vector<ChannelRange> out;
  for (const auto& d : ds.domains) {
    ChannelRange r;
    const int k = d.channels();
    r.lo = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::infinity());
    r.hi = Eigen::VectorXd::Constant(k, -std::numeric_limits<double>::infinity());
    for (const auto& s : d.series) {
      r.lo = r.lo.cwiseMin(s.rowwise().minCoeff());
      r.hi = r.hi.cwiseMax(s.rowwise().maxCoeff());
    }
    out.push_back(std::move(r));
  }
  return out;
}

PairedMultiSourceDataset apply_ranges(const PairedMultiSourceDataset& ds,
                                      const std::vector<ChannelRange>& ranges) {
  PairedMultiSourceDataset out = ds;
  for (std::size_t v = 0; v < out.domains.size(); ++v) {
    const auto& r = ranges.at(v);
    for (auto& s : out.domains[v].series) {
      for (Eigen::Index ch = 0; ch < s.rows(); ++ch) {
        const double span = r.hi(ch) - r.lo(ch);
        if (span == 0.0) {
          s.row(ch).setZero();
        } else {
          s.row(ch) = (s.row(ch).array() - r.lo(ch)) * (2.0 / span) - 1.0;
        }
      }
    }
  }
  return out;
}

}  // namespace

PairedMultiSourceDataset rescale_minmax(const PairedMultiSourceDataset& dataset) {
  dataset.validate();
  return apply_ranges(dataset, channel_ranges(dataset));
}

PairedMultiSourceDataset rescale_minmax(const PairedMultiSourceDataset& dataset,
                                        const PairedMultiSourceDataset& stats_source) {
  if (stats_source.domains.size() != dataset.domains.size())
    throw PairingError("rescale_minmax: domain count mismatch with stats source");
  return apply_ranges(dataset, channel_ranges(stats_source));
}

SubjectSplit split_by_subject(const PairedMultiSourceDataset& dataset,
                              const std::set<std::string>& train_subjects) {
  std::vector<int> train_idx, val_idx;
  for (std::size_t n = 0; n < dataset.subject_ids.size(); ++n) {
    if (train_subjects.count(dataset.subject_ids[n]))
      train_idx.push_back(static_cast<int>(n));
    else
      val_idx.push_back(static_cast<int>(n));
  }
  if (train_idx.empty()) throw PairingError("split_by_subject: empty train partition");
  if (val_idx.empty()) throw PairingError("split_by_subject: empty validation partition");
  return {dataset.select(train_idx), dataset.select(val_idx)};
}

SubjectSplit split_random_subjects(const PairedMultiSourceDataset& dataset,
                                   int train_count, std::uint64_t seed) {
  std::vector<std::string> subjects;
  for (const auto& s : dataset.subject_ids)
    if (std::find(subjects.begin(), subjects.end(), s) == subjects.end())
      subjects.push_back(s);
  std::sort(subjects.begin(), subjects.end());
  if (train_count <= 0 || train_count >= static_cast<int>(subjects.size()))
    throw PairingError("split_random_subjects: train_count must leave both partitions nonempty");
  auto rng = make_rng(seed, 0xf01d);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  std::set<std::string> chosen(subjects.begin(), subjects.begin() + train_count);
  return split_by_subject(dataset, chosen);
}

}  // namespace adaptts
