#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinyva/iegm/rhythm.hpp"

namespace tinyva::iegm {

inline constexpr std::size_t kSegmentLength = 1250;
inline constexpr double kSampleRateHz = 250.0;
inline constexpr std::size_t kWindowStride = 150;

/// One 5 s single-lead window; the unit of classification.
struct IegmSegment {
  std::string patient_id;
  SubCategory label{SubCategory::SR};
  std::uint32_t index{0};  // position of the window within its patient
  std::vector<float> samples;

  MainCategory main() const noexcept { return main_category(label); }

  friend bool operator==(const IegmSegment&, const IegmSegment&) = default;
};

struct Episode {
  SubCategory label{SubCategory::SR};
  std::vector<float> samples;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct PatientRecording {
  std::string patient_id;
  std::vector<Episode> episodes;

  friend bool operator==(const PatientRecording&, const PatientRecording&) = default;
};

/// Throws ConfigError unless the segment has exactly kSegmentLength finite samples.
void validate_segment(const IegmSegment& seg);

/// Patient ids end up in file names and header lines.
bool is_valid_patient_id(std::string_view id) noexcept;

}  // namespace tinyva::iegm
