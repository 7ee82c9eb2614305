// replay.cpp

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

#include "pced/replay.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace pced::replay {

std::string to_string(Policy p) {
  switch (p) {
    case Policy::kReservoirStandard: return "reservoir_standard";
    case Policy::kReservoirPaperLiteral: return "reservoir_paper_literal";
    case Policy::kClassBalanced: return "class_balanced";
  }
  return "unknown";
}

Policy policy_from_string(const std::string& name) {
  if (name == "reservoir_standard") return Policy::kReservoirStandard;
  if (name == "reservoir_paper_literal") return Policy::kReservoirPaperLiteral;
  if (name == "class_balanced") return Policy::kClassBalanced;
  throw ConfigError("unknown replay policy '" + name + "'");
}

ReplayMemory::ReplayMemory(std::size_t capacity, Policy policy, std::uint64_t seed)
    : capacity_(capacity), policy_(policy), rng_(seed) {
  entries_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayMemory::check_shape(const LabeledTrial& entry) const {
  if (entries_.empty()) return;
  const Trial& ref = entries_.front().trial;
  if (entry.trial.rows() != ref.rows() || entry.trial.cols() != ref.cols()) {
    throw ShapeError("replay memory holds " + std::to_string(ref.rows()) + "x" +
                     std::to_string(ref.cols()) + " trials, got " +
                     std::to_string(entry.trial.rows()) + "x" +
                     std::to_string(entry.trial.cols()));
  }
}

bool ReplayMemory::contains(const LabeledTrial& entry) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const LabeledTrial& e) {
    return e.subject_id == entry.subject_id && e.timestamp == entry.timestamp;
  });
}

bool ReplayMemory::offer(const LabeledTrial& entry) {
  check_shape(entry);
  ++seen_;
  if (capacity_ == 0 || contains(entry)) return false;
  if (entries_.size() < capacity_) {
    entries_.push_back(entry);
    return true;
  }
  switch (policy_) {
    case Policy::kReservoirStandard:
    case Policy::kClassBalanced: {
      const std::uint64_t j =
          std::uniform_int_distribution<std::uint64_t>(0, seen_ - 1)(rng_);
      if (j >= capacity_) return false;
      entries_[static_cast<std::size_t>(j)] = entry;
      return true;
    }
    case Policy::kReservoirPaperLiteral: {
      const double b = static_cast<double>(capacity_);
      const double p = b / (b + static_cast<double>(entries_.size()));
      if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) >= p) return false;
      entries_[uniform_index(rng_, entries_.size())] = entry;
      return true;
    }
  }
  return false;
}

std::size_t ReplayMemory::count(int subject_id, int class_label) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const LabeledTrial& e) {
        return e.subject_id == subject_id && e.class_label == class_label;
      }));
}

void ReplayMemory::evict_one(int incoming_subject) {
  // Subjects in storage order of first appearance; oldest first.
  std::vector<int> subjects;
  std::map<int, std::size_t> per_subject;
  for (const LabeledTrial& e : entries_) {
    if (per_subject[e.subject_id]++ == 0) subjects.push_back(e.subject_id);
  }
  std::size_t n_subjects = subjects.size();
  if (per_subject.find(incoming_subject) == per_subject.end()) ++n_subjects;
  const std::size_t fair = capacity_ / n_subjects;

  int victim = incoming_subject;
  bool found = false;
  for (int s : subjects) {
    if (s != incoming_subject && per_subject[s] > fair) {
      victim = s;
      found = true;
      break;
    }
  }
  if (!found) {
    for (int s : subjects) {
      if (s != incoming_subject) {
        victim = s;
        break;
      }
    }
  }

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].subject_id == victim) by_class[entries_[i].class_label].push_back(i);
  }
  const std::vector<std::size_t>* largest = nullptr;
  for (const auto& [label, idx] : by_class) {
    if (largest == nullptr || idx.size() > largest->size()) largest = &idx;
  }
  const std::size_t slot = (*largest)[uniform_index(rng_, largest->size())];
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(slot));
}

std::size_t ReplayMemory::store_class_balanced(const SubjectDataset& dataset,
                                               std::size_t per_class, Rng& rng) {
  if (policy_ != Policy::kClassBalanced) {
    throw ConfigError("store_class_balanced requires the class_balanced policy");
  }
  if (dataset.splits.size() != dataset.trials.size()) {
    throw ShapeError("store_class_balanced: split tags do not match trials");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    if (dataset.splits[i] == Split::kTrain) {
      by_class[dataset.trials[i].class_label].push_back(i);
    }
  }
  std::size_t stored = 0;
  for (auto& [label, idx] : by_class) {
    const std::size_t take = std::min(per_class, idx.size());
    // Partial Fisher-Yates: the first `take` positions become the sample.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      const LabeledTrial& entry = dataset.trials[idx[i]];
      check_shape(entry);
      ++seen_;
      if (capacity_ == 0 || contains(entry)) continue;
      if (entries_.size() >= capacity_) evict_one(entry.subject_id);
      entries_.push_back(entry);
      ++stored;
    }
  }
  return stored;
}

std::vector<std::uint8_t> ReplayMemory::encode(int n_classes) const {
  binary::Writer out;
  out.bytes("EEGM");
  out.u16(1);
  out.u64(capacity_);
  out.u64(seen_);
  out.u8(static_cast<std::uint8_t>(policy_));
  out.u32(static_cast<std::uint32_t>(entries_.size()));
  const std::size_t channels = entries_.empty() ? 0 : entries_.front().trial.rows();
  const std::size_t time = entries_.empty() ? 0 : entries_.front().trial.cols();
  out.u16(static_cast<std::uint16_t>(channels));
  out.u32(static_cast<std::uint32_t>(time));
  out.u16(static_cast<std::uint16_t>(n_classes));
  std::ostringstream state;
  state << rng_;
  const std::string s = state.str();
  out.u32(static_cast<std::uint32_t>(s.size()));
  out.bytes(s);
  for (const LabeledTrial& e : entries_) {
    out.u32(static_cast<std::uint32_t>(e.subject_id));
    dataset::write_trial_record(out, e, Split::kTrain);
  }
  return out.release();
}

ReplayMemory ReplayMemory::decode(std::span<const std::uint8_t> bytes) {
  binary::Reader in(bytes);
  in.expect_magic("EEGM");
  const std::uint64_t version_at = in.offset();
  if (in.u16() != 1) throw FormatError("unsupported replay memory version", version_at);
  const std::uint64_t capacity = in.u64();
  const std::uint64_t seen = in.u64();
  const std::uint64_t policy_at = in.offset();
  const std::uint8_t policy = in.u8();
  if (policy > 2) throw FormatError("invalid replay policy tag", policy_at);
  const std::uint32_t n_entries = in.u32();
  const std::uint16_t channels = in.u16();
  const std::uint32_t time = in.u32();
  const std::uint16_t n_classes = in.u16();
  if (n_entries > capacity) {
    throw FormatError("more entries than capacity", policy_at + 1);
  }
  ReplayMemory memory(static_cast<std::size_t>(capacity), static_cast<Policy>(policy), 0);
  const std::uint64_t state_at = in.offset();
  std::istringstream state(in.string(in.u32()));
  state >> memory.rng_;
  if (!state) throw FormatError("corrupt random state", state_at);
  memory.seen_ = seen;
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    const int subject = static_cast<int>(in.u32());
    memory.entries_.push_back(dataset::read_trial_record(
        in, channels, static_cast<int>(time), n_classes, subject, nullptr));
  }
  in.expect_end();
  return memory;
}

}  // namespace pced::replay
