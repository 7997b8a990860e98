#pragma once

#include <cstdint>
#include <span>

#include "tinyva/detectors/model.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::detectors {

/// Symmetric weight quantizer: scale = max|w| / 127, zero point 0. An all-zero
/// tensor gets scale 1/127.
QuantParams symmetric_weight_params(std::span<const float> weights);

/// Asymmetric unsigned 8-bit quantizer for the range [lo, hi] widened to contain 0.
QuantParams activation_params(double lo, double hi);

std::int8_t quantize_weight(float w, const QuantParams& q);
std::uint8_t quantize_activation(double x, const QuantParams& q);

/// Fixed-point multiplier for requantization: real ~= multiplier * 2^-shift,
/// multiplier in [2^30, 2^31).
struct FixedPointMultiplier {
  std::int32_t multiplier{0};
  int shift{0};
};

FixedPointMultiplier to_fixed_point(double real_multiplier);

/// round-half-up(acc * multiplier / 2^shift).
std::int32_t apply_multiplier(std::int32_t acc, const FixedPointMultiplier& m);

/// Post-training quantization using activation ranges observed on `calibration`.
/// Throws ConfigError when calibration is empty.
QuantizedCnn quantize_int8(const FloatCnn& model, std::span<const iegm::IegmSegment> calibration);
ModelArtifact quantize_int8(const ModelArtifact& model,
                            std::span<const iegm::IegmSegment> calibration);

}  // namespace tinyva::detectors
