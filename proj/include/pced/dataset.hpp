// pced/dataset.hpp

// Copyright 2026 The PCED Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Labeled trials, per-subject datasets with train/val/test tags, the
// synthetic subject-stream generator and the on-disk stream format.
//
// Stream directory:
//   manifest.json        version, dimensions, seed, subject ids and files
//   subject_NNN.bin      one per subject, layout below (little-endian)
//
//   "EEGC" u16 version=1 u32 n_trials u16 channels u32 timepoints u16 n_classes
//   per trial: u32 timestamp, u8 class_label, u8 split (0 train/1 val/2 test),
//              channels*timepoints f32, channel-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pced/binary_io.hpp"
#include "pced/matrix.hpp"

namespace pced {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

struct LabeledTrial {
  Trial trial;
  int class_label = 0;
  int subject_id = 0;
  std::uint32_t timestamp = 0;

  bool operator==(const LabeledTrial&) const = default;
};

struct SubjectDataset {
  int subject_id = 0;
  int n_classes = 2;
  std::vector<LabeledTrial> trials;
  std::vector<Split> splits;  // parallel to `trials`

  /// Copies of the trials tagged `split`, in storage order.
  std::vector<LabeledTrial> subset(Split split) const;
  std::size_t count(Split split) const;

  /// Checks the parallel-vector, label-range, timestamp-order and
  /// train-coverage invariants. Throws on violation.
  void validate() const;

  bool operator==(const SubjectDataset&) const = default;
};

struct StreamConfig {
  int n_subjects = 8;
  int n_channels = 8;
  int n_timepoints = 64;
  int n_classes = 2;
  int trials_per_subject = 120;
  double mixing_scale = 1.0;
  double noise_sigma = 1.5;
  std::uint64_t seed = 7;
  double train_fraction = 0.7;

  /// Throws ConfigError on an invalid configuration.
  void validate() const;
};

struct Stream {
  int n_channels = 0;
  int n_timepoints = 0;
  int n_classes = 0;
  std::uint64_t seed = 0;
  std::vector<SubjectDataset> subjects;

  bool operator==(const Stream&) const = default;
};

namespace dataset {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr int kManifestVersion = 1;

/// Stratified split. Per class (ascending label order) the trials are shuffled
/// with `seed`, the first floor(train_frac * n) become train and the rest
/// alternate val/test. The val/test alternation continues across classes, so
/// odd remainders are shared out evenly over the whole subject.
SubjectDataset split_subject(SubjectDataset dataset, double train_frac,
                             std::uint64_t seed);

/// Synthetic stream. Class c has a fixed source pattern S_c (jointly whitened
/// so that the mean class covariance is the identity); subject k has a
/// symmetric positive-definite mixing A_k = expm(mixing_scale * sym(G_k)) and
/// trial = A_k (S_c + noise_sigma * N).
Stream gen_stream(const StreamConfig& config);

/// The class source patterns gen_stream draws for `config`.
std::vector<Matrix> source_patterns(const StreamConfig& config);

/// The mixing matrix gen_stream draws for subject `index`.
Matrix subject_mixing(const StreamConfig& config, int index);

std::vector<std::uint8_t> encode_subject(const SubjectDataset& dataset,
                                         int n_channels, int n_timepoints);
SubjectDataset decode_subject(std::span<const std::uint8_t> bytes, int subject_id);

/// One trial record as stored in subject files (timestamp, label, split,
/// samples). Also used by the replay-memory checkpoint format.
void write_trial_record(binary::Writer& out, const LabeledTrial& trial, Split split);
LabeledTrial read_trial_record(binary::Reader& in, int n_channels, int n_timepoints,
                               int n_classes, int subject_id, Split* split);

std::string subject_file_name(int index);

void save_stream(const Stream& stream, const std::filesystem::path& dir);
Stream load_stream(const std::filesystem::path& dir);

}  // namespace dataset
}  // namespace pced
