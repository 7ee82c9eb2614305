// dataset.cpp

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

#include "pced/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pced/linalg.hpp"
#include "pced/random.hpp"

namespace pced {

std::vector<LabeledTrial> SubjectDataset::subset(Split split) const {
  std::vector<LabeledTrial> out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (splits[i] == split) out.push_back(trials[i]);
  }
  return out;
}

std::size_t SubjectDataset::count(Split split) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

void SubjectDataset::validate() const {
  if (splits.size() != trials.size()) {
    throw ShapeError("subject " + std::to_string(subject_id) + ": " +
                     std::to_string(splits.size()) + " split tags for " +
                     std::to_string(trials.size()) + " trials");
  }
  std::vector<bool> in_train(static_cast<std::size_t>(n_classes), false);
  std::vector<bool> present(static_cast<std::size_t>(n_classes), false);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const LabeledTrial& t = trials[i];
    if (t.class_label < 0 || t.class_label >= n_classes) {
      throw RangeError("subject " + std::to_string(subject_id) + ": label " +
                       std::to_string(t.class_label) + " outside [0, " +
                       std::to_string(n_classes) + ")");
    }
    if (i > 0 && t.timestamp <= trials[i - 1].timestamp) {
      throw RangeError("subject " + std::to_string(subject_id) +
                       ": timestamps not strictly increasing at trial " +
                       std::to_string(i));
    }
    present[static_cast<std::size_t>(t.class_label)] = true;
    if (splits[i] == Split::kTrain) in_train[static_cast<std::size_t>(t.class_label)] = true;
  }
  for (int c = 0; c < n_classes; ++c) {
    if (present[static_cast<std::size_t>(c)] && !in_train[static_cast<std::size_t>(c)]) {
      throw StratificationError("subject " + std::to_string(subject_id) + ": class " +
                                std::to_string(c) + " missing from the train split");
    }
  }
}

void StreamConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(n_subjects >= 1, "n_subjects must be >= 1");
  need(n_channels >= 1, "n_channels must be >= 1");
  need(n_channels <= 65535, "n_channels must fit in 16 bits");
  need(n_timepoints >= 2, "n_timepoints must be >= 2");
  need(n_classes >= 2, "n_classes must be >= 2");
  need(n_classes <= 255, "n_classes must fit in 8 bits");
  need(trials_per_subject >= 1, "trials_per_subject must be >= 1");
  need(mixing_scale >= 0.0 && std::isfinite(mixing_scale),
       "mixing_scale must be finite and non-negative");
  need(noise_sigma >= 0.0 && std::isfinite(noise_sigma),
       "noise_sigma must be finite and non-negative");
  need(train_fraction > 0.0 && train_fraction < 1.0,
       "train_fraction must lie in (0, 1)");
}

namespace dataset {

SubjectDataset split_subject(SubjectDataset dataset, double train_frac,
                             std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw RangeError("split_subject: train_frac must lie in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    by_class[dataset.trials[i].class_label].push_back(i);
  }
  dataset.splits.assign(dataset.trials.size(), Split::kTrain);
  Rng rng(seed);
  bool next_is_val = true;
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 3) {
      throw StratificationError("split_subject: class " + std::to_string(label) +
                                " has " + std::to_string(idx.size()) +
                                " trials, need at least 3");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    // The slack keeps products such as 0.7 * 90 from flooring to 62.
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_frac * static_cast<double>(idx.size()) + 1e-9));
    if (n_train == 0) {
      throw StratificationError("split_subject: class " + std::to_string(label) +
                                " would have no training trials");
    }
    for (std::size_t k = n_train; k < idx.size(); ++k) {
      dataset.splits[idx[k]] = next_is_val ? Split::kVal : Split::kTest;
      next_is_val = !next_is_val;
    }
  }
  return dataset;
}

namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = normal(rng);
  return m;
}

double determinant_spd(const linalg::SymEigResult& eig) {
  double d = 1.0;
  for (double l : eig.eigenvalues) d *= l;
  return d;
}

}  // namespace

std::vector<Matrix> source_patterns(const StreamConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "sources"));
  const auto channels = static_cast<std::size_t>(config.n_channels);
  const auto time = static_cast<std::size_t>(config.n_timepoints);
  std::vector<Matrix> sources;
  Matrix mean_cov(channels, channels);
  for (int c = 0; c < config.n_classes; ++c) {
    sources.push_back(gaussian_matrix(rng, channels, time));
    mean_cov = linalg::add(mean_cov, linalg::covariance(sources.back()));
  }
  mean_cov = linalg::scale(mean_cov, 1.0 / config.n_classes);
  // Jointly whiten so that the noise-free mean class covariance is I.
  const Matrix w = linalg::inv_sqrt(mean_cov);
  for (Matrix& s : sources) s = linalg::matmul(w, s);
  return sources;
}

Matrix subject_mixing(const StreamConfig& config, int index) {
  config.validate();
  Rng rng(derive_seed(config.seed, "mixing", static_cast<std::uint64_t>(index)));
  const auto channels = static_cast<std::size_t>(config.n_channels);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Matrix g = gaussian_matrix(rng, channels, channels);
    const Matrix sym = linalg::scale(linalg::add(g, linalg::transpose(g)),
                                     0.5 * config.mixing_scale);
    Matrix a = linalg::sym_apply(sym, [](double l) { return std::exp(l); });
    if (std::abs(determinant_spd(linalg::sym_eig(a))) > 1e-3) return a;
  }
  throw ConfigError("could not draw a well-conditioned mixing matrix; "
                    "mixing_scale is too large");
}

Stream gen_stream(const StreamConfig& config) {
  config.validate();
  const auto channels = static_cast<std::size_t>(config.n_channels);
  const auto time = static_cast<std::size_t>(config.n_timepoints);
  const std::vector<Matrix> sources = source_patterns(config);

  Stream stream;
  stream.n_channels = config.n_channels;
  stream.n_timepoints = config.n_timepoints;
  stream.n_classes = config.n_classes;
  stream.seed = config.seed;

  std::uint32_t clock = 0;
  for (int k = 0; k < config.n_subjects; ++k) {
    const Matrix mixing = subject_mixing(config, k);
    Rng rng(derive_seed(config.seed, "trials", static_cast<std::uint64_t>(k)));
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<int> labels(static_cast<std::size_t>(config.trials_per_subject));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<int>(i % static_cast<std::size_t>(config.n_classes));
    }
    std::shuffle(labels.begin(), labels.end(), rng);

    SubjectDataset ds;
    ds.subject_id = k;
    ds.n_classes = config.n_classes;
    ds.trials.reserve(labels.size());
    for (int label : labels) {
      const Matrix& s = sources[static_cast<std::size_t>(label)];
      Matrix x(channels, time);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t t = 0; t < time; ++t) {
          x(c, t) = s(c, t) + config.noise_sigma * normal(rng);
        }
      }
      const Matrix mixed = linalg::matmul(mixing, x);
      Trial trial(channels, time);
      auto dst = trial.values();
      auto src = mixed.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src[i]);
      ds.trials.push_back(LabeledTrial{std::move(trial), label, k, clock++});
    }
    ds = split_subject(std::move(ds), config.train_fraction,
                       derive_seed(config.seed, "split", static_cast<std::uint64_t>(k)));
    stream.subjects.push_back(std::move(ds));
  }
  return stream;
}

void write_trial_record(binary::Writer& out, const LabeledTrial& trial, Split split) {
  if (trial.class_label < 0 || trial.class_label > 255) {
    throw RangeError("class label does not fit the trial record");
  }
  out.u32(trial.timestamp);
  out.u8(static_cast<std::uint8_t>(trial.class_label));
  out.u8(static_cast<std::uint8_t>(split));
  for (float v : trial.trial.values()) out.f32(v);
}

LabeledTrial read_trial_record(binary::Reader& in, int n_channels, int n_timepoints,
                               int n_classes, int subject_id, Split* split) {
  const std::uint64_t at = in.offset();
  LabeledTrial t;
  t.subject_id = subject_id;
  t.timestamp = in.u32();
  t.class_label = in.u8();
  if (t.class_label >= n_classes) {
    throw FormatError("class label " + std::to_string(t.class_label) +
                      " exceeds class count " + std::to_string(n_classes), at + 4);
  }
  const std::uint8_t tag = in.u8();
  if (tag > 2) throw FormatError("invalid split tag " + std::to_string(tag), at + 5);
  if (split != nullptr) *split = static_cast<Split>(tag);
  const auto n = static_cast<std::size_t>(n_channels) * static_cast<std::size_t>(n_timepoints);
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = in.f32();
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite sample value", in.offset() - 4);
    }
  }
  t.trial = Trial(static_cast<std::size_t>(n_channels),
                  static_cast<std::size_t>(n_timepoints), std::move(values));
  return t;
}

std::vector<std::uint8_t> encode_subject(const SubjectDataset& dataset,
                                         int n_channels, int n_timepoints) {
  if (dataset.splits.size() != dataset.trials.size()) {
    throw ShapeError("encode_subject: split tags do not match trials");
  }
  binary::Writer out;
  out.bytes("EEGC");
  out.u16(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(dataset.trials.size()));
  out.u16(static_cast<std::uint16_t>(n_channels));
  out.u32(static_cast<std::uint32_t>(n_timepoints));
  out.u16(static_cast<std::uint16_t>(dataset.n_classes));
  for (std::size_t i = 0; i < dataset.trials.size(); ++i) {
    const Trial& x = dataset.trials[i].trial;
    if (x.rows() != static_cast<std::size_t>(n_channels) ||
        x.cols() != static_cast<std::size_t>(n_timepoints)) {
      throw ShapeError("encode_subject: trial " + std::to_string(i) +
                       " has the wrong shape");
    }
    write_trial_record(out, dataset.trials[i], dataset.splits[i]);
  }
  return out.release();
}

SubjectDataset decode_subject(std::span<const std::uint8_t> bytes, int subject_id) {
  binary::Reader in(bytes);
  in.expect_magic("EEGC");
  const std::uint64_t version_at = in.offset();
  const std::uint16_t version = in.u16();
  if (version != kFormatVersion) {
    throw FormatError("unsupported subject format version " + std::to_string(version),
                      version_at);
  }
  const std::uint32_t n_trials = in.u32();
  const std::uint16_t channels = in.u16();
  const std::uint32_t timepoints = in.u32();
  const std::uint64_t classes_at = in.offset();
  const std::uint16_t n_classes = in.u16();
  if (channels == 0 || timepoints == 0 || n_classes < 2) {
    throw FormatError("invalid subject header dimensions", classes_at);
  }
  const std::uint64_t record_bytes =
      6 + 4ull * std::uint64_t{channels} * std::uint64_t{timepoints};
  if (in.remaining() / record_bytes < n_trials) {
    throw FormatError("truncated subject file: header declares " +
                          std::to_string(n_trials) + " trials",
                      in.offset() + in.remaining());
  }
  SubjectDataset ds;
  ds.subject_id = subject_id;
  ds.n_classes = n_classes;
  ds.trials.reserve(n_trials);
  ds.splits.reserve(n_trials);
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    Split split;
    ds.trials.push_back(read_trial_record(in, channels, static_cast<int>(timepoints),
                                          n_classes, subject_id, &split));
    ds.splits.push_back(split);
  }
  in.expect_end();
  return ds;
}

std::string subject_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03d.bin", index);
  return buf;
}

void save_stream(const Stream& stream, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["version"] = kManifestVersion;
  manifest["n_subjects"] = stream.subjects.size();
  manifest["n_channels"] = stream.n_channels;
  manifest["n_timepoints"] = stream.n_timepoints;
  manifest["n_classes"] = stream.n_classes;
  manifest["seed"] = stream.seed;
  manifest["subjects"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < stream.subjects.size(); ++k) {
    const SubjectDataset& s = stream.subjects[k];
    const std::string file = subject_file_name(static_cast<int>(k));
    binary::write_file(dir / file,
                       encode_subject(s, stream.n_channels, stream.n_timepoints));
    manifest["subjects"].push_back({{"id", s.subject_id}, {"file", file}});
  }
  const std::string text = manifest.dump(2) + "\n";
  binary::write_file(dir / "manifest.json",
                     std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                               text.size()));
}

Stream load_stream(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const std::vector<std::uint8_t> raw = binary::read_file(manifest_path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()), e.byte);
  }
  Stream stream;
  std::size_t declared = 0;
  try {
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw FormatError("manifest.json: unsupported version", 0);
    }
    declared = manifest.at("n_subjects").get<std::size_t>();
    stream.n_channels = manifest.at("n_channels").get<int>();
    stream.n_timepoints = manifest.at("n_timepoints").get<int>();
    stream.n_classes = manifest.at("n_classes").get<int>();
    stream.seed = manifest.at("seed").get<std::uint64_t>();
    const auto& entries = manifest.at("subjects");
    if (!entries.is_array() || entries.size() != declared) {
      throw ConsistencyError("manifest declares " + std::to_string(declared) +
                             " subjects but lists " +
                             std::to_string(entries.is_array() ? entries.size() : 0));
    }
    for (const auto& entry : entries) {
      const int id = entry.at("id").get<int>();
      const auto path = dir / entry.at("file").get<std::string>();
      if (!std::filesystem::exists(path)) {
        throw ConsistencyError("manifest lists " + path.string() +
                               " but the file is missing");
      }
      const std::vector<std::uint8_t> bytes = binary::read_file(path);
      SubjectDataset ds = decode_subject(bytes, id);
      if (ds.n_classes != stream.n_classes ||
          (!ds.trials.empty() &&
           (ds.trials.front().trial.rows() != static_cast<std::size_t>(stream.n_channels) ||
            ds.trials.front().trial.cols() != static_cast<std::size_t>(stream.n_timepoints)))) {
        throw ConsistencyError(path.string() + ": dimensions disagree with manifest");
      }
      stream.subjects.push_back(std::move(ds));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()), 0);
  }
  return stream;
}

}  // namespace dataset

namespace binary {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace binary
}  // namespace pced
