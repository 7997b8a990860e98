#include "tinyva/iegm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <unordered_set>

#include "tinyva/errors.hpp"
#include "tinyva/random.hpp"

namespace tinyva::iegm {

SegmentationResult segment_recording(const PatientRecording& rec, std::size_t window,
                                     std::size_t stride) {
  if (window == 0 || stride == 0) throw ConfigError("window and stride must be positive");
  SegmentationResult result;
  std::uint32_t index = 0;
  for (const auto& episode : rec.episodes) {
    const std::size_t n = episode.samples.size();
    if (n < window) {
      ++result.skipped_episodes;
      continue;
    }
    for (std::size_t offset = 0; offset + window <= n; offset += stride) {
      IegmSegment seg;
      seg.patient_id = rec.patient_id;
      seg.label = episode.label;
      seg.index = index++;
      seg.samples.assign(episode.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                         episode.samples.begin() + static_cast<std::ptrdiff_t>(offset + window));
      result.segments.push_back(std::move(seg));
    }
  }
  return result;
}

bool DatasetManifest::in_train(std::string_view patient) const {
  return std::find(train_patients.begin(), train_patients.end(), patient) != train_patients.end();
}

bool DatasetManifest::in_test(std::string_view patient) const {
  return std::find(test_patients.begin(), test_patients.end(), patient) != test_patients.end();
}

DatasetManifest partition_patients(std::span<const std::string> patients, double train_fraction,
                                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  if (patients.size() < 2) throw ConfigError("at least 2 patients are required for a split");
  std::unordered_set<std::string> unique(patients.begin(), patients.end());
  if (unique.size() != patients.size()) throw ConfigError("duplicate patient id in split input");

  std::vector<std::string> order(patients.begin(), patients.end());
  std::sort(order.begin(), order.end());
  Rng rng(derive_seed(seed, "partition"));
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }

  const auto n = static_cast<double>(order.size());
  // Ties go to the even count: 0.85 * 90 = 76.5 -> 76.
  auto n_train = static_cast<std::size_t>(std::nearbyint(train_fraction * n));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);

  DatasetManifest m;
  m.seed = seed;
  m.train_fraction = train_fraction;
  m.train_patients.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  m.test_patients.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(m.train_patients.begin(), m.train_patients.end());
  std::sort(m.test_patients.begin(), m.test_patients.end());
  return m;
}

void record_counts(DatasetManifest& manifest, std::span<const IegmSegment> segments) {
  manifest.train_counts = {};
  manifest.test_counts = {};
  for (const auto& seg : segments) {
    if (manifest.in_train(seg.patient_id)) {
      ++manifest.train_counts[index_of(seg.label)];
    } else if (manifest.in_test(seg.patient_id)) {
      ++manifest.test_counts[index_of(seg.label)];
    }
  }
}

Dataset assemble_dataset(DatasetManifest manifest, std::vector<IegmSegment> segments) {
  record_counts(manifest, segments);
  Dataset ds;
  for (auto& seg : segments) {
    if (manifest.in_train(seg.patient_id)) {
      ds.train.push_back(std::move(seg));
    } else if (manifest.in_test(seg.patient_id)) {
      ds.test.push_back(std::move(seg));
    } else {
      throw ConfigError("patient '" + seg.patient_id + "' is in neither split");
    }
  }
  ds.manifest = std::move(manifest);
  return ds;
}

std::string patient_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%03zu", i);
  return buf;
}

Dataset generate_dataset(const RhythmProfile& profile, std::size_t patients,
                         double train_fraction, std::uint64_t seed) {
  profile.validate();
  std::vector<std::string> ids;
  std::vector<IegmSegment> segments;
  for (std::size_t i = 0; i < patients; ++i) {
    ids.push_back(patient_name(i));
    const auto rec = generate_patient(profile, ids.back(), seed);
    auto windows = segment_recording(rec).segments;
    std::move(windows.begin(), windows.end(), std::back_inserter(segments));
  }
  auto manifest = partition_patients(ids, train_fraction, seed);
  return assemble_dataset(std::move(manifest), std::move(segments));
}

}  // namespace tinyva::iegm
