#pragma once

#include <cstdint>

#include "tinyva/iegm/segment.hpp"

namespace tinyva::iegm {

enum class FlipMode : std::uint8_t {
  Amplitude,  // negate every sample
  Time,       // reverse sample order
};

IegmSegment augment_flip(const IegmSegment& seg, FlipMode mode = FlipMode::Amplitude);

/// Adds N(0, (sigma_fraction * std(samples))^2) noise. Throws ConfigError if
/// sigma_fraction is negative.
IegmSegment augment_noise(const IegmSegment& seg, double sigma_fraction, std::uint64_t seed);

/// Population standard deviation.
double population_std(std::span<const float> xs);

}  // namespace tinyva::iegm
