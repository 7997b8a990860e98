#include "tinyva/iegm/augment.hpp"

#include <algorithm>
#include <cmath>

#include "tinyva/errors.hpp"
#include "tinyva/random.hpp"

namespace tinyva::iegm {

double population_std(std::span<const float> xs) {
  if (xs.empty()) return 0.0;
  double mean = 0.0;
  for (float x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (float x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

IegmSegment augment_flip(const IegmSegment& seg, FlipMode mode) {
  IegmSegment out = seg;
  if (mode == FlipMode::Amplitude) {
    for (float& x : out.samples) x = -x;
  } else {
    std::reverse(out.samples.begin(), out.samples.end());
  }
  return out;
}

IegmSegment augment_noise(const IegmSegment& seg, double sigma_fraction, std::uint64_t seed) {
  if (!(sigma_fraction >= 0.0)) throw ConfigError("noise sigma fraction must be non-negative");
  IegmSegment out = seg;
  if (sigma_fraction == 0.0) return out;
  const double sigma = sigma_fraction * population_std(seg.samples);
  Rng rng(seed);
  for (float& x : out.samples) x = static_cast<float>(x + sigma * rng.normal());
  return out;
}

}  // namespace tinyva::iegm
