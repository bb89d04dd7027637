#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "adaptts/errors.hpp"

namespace adaptts {

/// One K-channel recording of length T. Rows are channels, columns are
/// timestamps. Entries must be finite.
using TimeSeries = Eigen::MatrixXd;

using Label = int;

struct DomainDataset {
  std::string name;
  std::vector<TimeSeries> series;

  int channels() const {
    return series.empty() ? 0 : static_cast<int>(series.front().rows());
  }
  int length() const {
    return series.empty() ? 0 : static_cast<int>(series.front().cols());
  }
  std::size_t size() const { return series.size(); }
};

/// V aligned domain datasets sharing one label list index-by-index.
/// The n-th series of every domain was recorded simultaneously and
/// carries labels[n].
struct PairedMultiSourceDataset {
  std::vector<DomainDataset> domains;
  std::vector<Label> labels;
  std::vector<std::string> subject_ids;  // one per index, shared by all domains
  int target_index = 0;

  std::size_t num_domains() const { return domains.size(); }
  std::size_t num_series() const { return labels.size(); }
  int channels() const { return domains.empty() ? 0 : domains.front().channels(); }
  int length() const { return domains.empty() ? 0 : domains.front().length(); }
  int num_labels() const;

  const DomainDataset& target() const { return domains.at(target_index); }
  std::vector<int> source_indices() const;

  /// Throws PairingError if any pairing invariant is violated.
  void validate() const;

  /// New dataset holding the given indices of every domain, preserving
  /// pairing. Indices may repeat (resampling).
  PairedMultiSourceDataset select(const std::vector<int>& indices) const;
};

/// UCI Daily and Sports Activities layout: root/aXX/pY/sZZ.txt, each file
/// 125 rows x 45 comma-separated columns. Columns are grouped 9 per body
/// unit (torso, right arm, left arm, right leg, left leg), each segment
/// transposed to a 9x125 series.
PairedMultiSourceDataset load_dsa_directory(const std::filesystem::path& root);

/// Generic manifest: JSON declaring domain names, per-series file lists,
/// a label file and a subject file. Series files are K rows x T
/// comma-separated columns.
PairedMultiSourceDataset load_generic(const std::filesystem::path& manifest);

/// Writes a manifest plus per-series files under dir; values round-trip
/// bit-exactly through load_generic.
void save_generic(const PairedMultiSourceDataset& dataset,
                  const std::filesystem::path& dir);

/// Single-file binary cache, bit-exact.
void save_cache(const PairedMultiSourceDataset& dataset,
                const std::filesystem::path& file);
PairedMultiSourceDataset load_cache(const std::filesystem::path& file);

/// Per-channel affine map onto [-1, 1]; channel statistics are global over
/// the dataset (all domains separately, per channel within each domain).
/// Constant channels map to 0.
PairedMultiSourceDataset rescale_minmax(const PairedMultiSourceDataset& dataset);

/// As above but min/max are computed on `stats_source` only (the training
/// split) and applied to `dataset`. Domain lists must align by index.
PairedMultiSourceDataset rescale_minmax(const PairedMultiSourceDataset& dataset,
                                        const PairedMultiSourceDataset& stats_source);

struct SubjectSplit {
  PairedMultiSourceDataset train;
  PairedMultiSourceDataset validation;
};

/// Every index whose subject id is in train_subjects goes to train, the
/// rest to validation. Both partitions must be nonempty.
SubjectSplit split_by_subject(const PairedMultiSourceDataset& dataset,
                              const std::set<std::string>& train_subjects);

/// Seed-deterministic choice of train_count subjects followed by
/// split_by_subject.
SubjectSplit split_random_subjects(const PairedMultiSourceDataset& dataset,
                                   int train_count, std::uint64_t seed);

}  // namespace adaptts
