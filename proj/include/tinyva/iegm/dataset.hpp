#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinyva/iegm/generator.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::iegm {

struct SegmentationResult {
  std::vector<IegmSegment> segments;
  std::size_t skipped_episodes{0};
};

/// Slides a window over each episode; windows never cross episode boundaries.
/// Episodes shorter than `window` are counted in skipped_episodes.
SegmentationResult segment_recording(const PatientRecording& rec,
                                     std::size_t window = kSegmentLength,
                                     std::size_t stride = kWindowStride);

constexpr std::size_t window_count(std::size_t length, std::size_t window = kSegmentLength,
                                   std::size_t stride = kWindowStride) noexcept {
  return length < window ? 0 : (length - window) / stride + 1;
}

using CategoryCounts = std::array<std::size_t, kSubCategoryCount>;

struct DatasetManifest {
  std::uint64_t seed{0};
  double train_fraction{0.85};
  std::vector<std::string> train_patients;
  std::vector<std::string> test_patients;
  CategoryCounts train_counts{};
  CategoryCounts test_counts{};

  bool in_train(std::string_view patient) const;
  bool in_test(std::string_view patient) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Patient-wise split. round-half-even(train_fraction * n) patients go to train,
/// clamped so both splits are non-empty.
DatasetManifest partition_patients(std::span<const std::string> patients,
                                   double train_fraction, std::uint64_t seed);

/// Fills the per-split, per-sub-category segment counts.
void record_counts(DatasetManifest& manifest, std::span<const IegmSegment> segments);

struct Dataset {
  DatasetManifest manifest;
  std::vector<IegmSegment> train;
  std::vector<IegmSegment> test;
};

/// Splits segments into train/test according to the manifest's patient lists.
Dataset assemble_dataset(DatasetManifest manifest, std::vector<IegmSegment> segments);

/// Zero-padded patient id, e.g. patient_name(7) == "P007".
std::string patient_name(std::size_t i);

/// Generates `patients` synthetic recordings (seeded per patient id), segments
/// them and splits patient-wise.
Dataset generate_dataset(const RhythmProfile& profile, std::size_t patients,
                         double train_fraction, std::uint64_t seed);

}  // namespace tinyva::iegm
