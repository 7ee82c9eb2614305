// pced/replay.hpp

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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pced/dataset.hpp"
#include "pced/random.hpp"

namespace pced::replay {

enum class Policy : std::uint8_t {
  /// Classic reservoir sampling: once full, the n-th offered item replaces a
  /// uniformly chosen slot with probability B / n.
  kReservoirStandard = 0,
  /// Replacement with the constant probability B / (B + |M|), i.e. 1/2 once
  /// the buffer is full. Kept for comparison; it does not retain uniformly.
  kReservoirPaperLiteral = 1,
  /// Up to `per_class` trials per class and subject, stored after each subject.
  kClassBalanced = 2,
};

std::string to_string(Policy p);
Policy policy_from_string(const std::string& name);

/// Capacity-bounded exemplar memory shared across subjects.
///
/// Insertion order is storage order; replacement writes into the evicted slot
/// and eviction under the class-balanced policy erases the slot, keeping the
/// remaining entries in order. Slot choices draw from the memory's own random
/// stream so that its contents do not depend on the training random stream.
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, Policy policy, std::uint64_t seed);

  /// Streams one entry through the reservoir rule. Returns true if it was
  /// stored. Re-offering an exemplar already present, i.e. the same
  /// (subject_id, timestamp), is rejected. seen() grows on every call.
  bool offer(const LabeledTrial& entry);

  /// Draws min(per_class, available) training-split trials of every class of
  /// `dataset` uniformly without replacement (using `rng`) and appends them.
  /// When the buffer would overflow, entries of the oldest subject that holds
  /// more than its fair share (capacity / stored subjects) are evicted at
  /// random, taken from that subject's largest class. Returns the number
  /// stored. Requires Policy::kClassBalanced.
  std::size_t store_class_balanced(const SubjectDataset& dataset,
                                   std::size_t per_class, Rng& rng);

  std::vector<LabeledTrial> snapshot() const { return entries_; }
  std::span<const LabeledTrial> entries() const noexcept { return entries_; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t seen() const noexcept { return seen_; }
  Policy policy() const noexcept { return policy_; }

  /// Stored count per (subject, class), useful for checking quotas.
  std::size_t count(int subject_id, int class_label) const;

  /// Checkpoint blob: "EEGM" u16 version, u64 capacity, u64 seen, u8 policy,
  /// u32 entries, u16 channels, u32 timepoints, u16 n_classes,
  /// u32 rng-state length + rng state text, then per entry u32 subject_id and
  /// the subject-file trial record (split tag written as train).
  std::vector<std::uint8_t> encode(int n_classes) const;
  static ReplayMemory decode(std::span<const std::uint8_t> bytes);

  bool operator==(const ReplayMemory&) const = default;

 private:
  void check_shape(const LabeledTrial& entry) const;
  bool contains(const LabeledTrial& entry) const;
  void evict_one(int incoming_subject);

  std::size_t capacity_;
  Policy policy_;
  Rng rng_;
  std::uint64_t seen_ = 0;
  std::vector<LabeledTrial> entries_;
};

}  // namespace pced::replay
