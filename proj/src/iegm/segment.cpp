#include "tinyva/iegm/segment.hpp"

#include <cmath>
#include <string>

#include "tinyva/errors.hpp"

namespace tinyva::iegm {

void validate_segment(const IegmSegment& seg) {
  if (seg.samples.size() != kSegmentLength) {
    throw ConfigError("segment of patient '" + seg.patient_id + "' has " +
                      std::to_string(seg.samples.size()) + " samples, expected " +
                      std::to_string(kSegmentLength));
  }
  for (std::size_t i = 0; i < seg.samples.size(); ++i) {
    if (!std::isfinite(seg.samples[i])) {
      throw ConfigError("segment of patient '" + seg.patient_id +
                        "' has a non-finite sample at index " + std::to_string(i));
    }
  }
}

bool is_valid_patient_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '.';
    if (!ok) return false;
  }
  return id != "." && id != "..";
}

}  // namespace tinyva::iegm
