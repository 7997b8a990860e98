#pragma once

#include <cstdint>
#include <span>

#include "tinyva/iegm/segment.hpp"

namespace tinyva::detectors {

/// Peak-count decision rule: VA iff the segment has at least
/// `peak_threshold` peaks above `factor` standard deviations.
struct PeakTreeParams {
  float factor{2.0f};
  std::uint32_t peak_threshold{0};

  friend bool operator==(const PeakTreeParams&, const PeakTreeParams&) = default;
};

enum class PeakCountMode : std::uint8_t {
  Runs,     // each maximal run of above-threshold samples is one peak
  Samples,  // every above-threshold sample counts
};

/// Counts peaks of the mean-removed signal above factor * population std.
/// A flat signal has no peaks.
std::size_t count_peaks(std::span<const float> samples, double factor,
                        PeakCountMode mode = PeakCountMode::Runs);

iegm::MainCategory peak_tree_classify(std::span<const float> samples, const PeakTreeParams& params,
                                      PeakCountMode mode = PeakCountMode::Runs);

struct PeakTreeTuning {
  PeakTreeParams params;
  double f_beta{0.0};
};

/// Exhaustive grid search maximizing F-beta (beta = 2) on `train`. Ties go to
/// the smaller threshold, then the smaller factor. Throws TuningError when the
/// training set lacks one of the classes and ConfigError on empty grids.
PeakTreeTuning tune_peak_tree(std::span<const iegm::IegmSegment> train,
                              std::span<const double> factor_grid,
                              std::span<const std::uint32_t> threshold_grid,
                              PeakCountMode mode = PeakCountMode::Runs);

}  // namespace tinyva::detectors
