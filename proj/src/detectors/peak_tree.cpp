#include "tinyva/detectors/peak_tree.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tinyva/errors.hpp"
#include "tinyva/scoring/metrics.hpp"

namespace tinyva::detectors {

std::size_t count_peaks(std::span<const float> samples, double factor, PeakCountMode mode) {
  if (samples.empty()) return 0;
  const auto n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (float x : samples) mean += x;
  mean /= n;
  double ss = 0.0;
  for (float x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (sd == 0.0) return 0;

  const double threshold = factor * sd;
  std::size_t peaks = 0;
  bool inside = false;
  for (float x : samples) {
    const bool above = (x - mean) > threshold;
    if (above && (mode == PeakCountMode::Samples || !inside)) ++peaks;
    inside = above;
  }
  return peaks;
}

iegm::MainCategory peak_tree_classify(std::span<const float> samples, const PeakTreeParams& params,
                                      PeakCountMode mode) {
  return count_peaks(samples, params.factor, mode) >= params.peak_threshold
             ? iegm::MainCategory::VA
             : iegm::MainCategory::NonVA;
}

PeakTreeTuning tune_peak_tree(std::span<const iegm::IegmSegment> train,
                              std::span<const double> factor_grid,
                              std::span<const std::uint32_t> threshold_grid, PeakCountMode mode) {
  if (factor_grid.empty() || threshold_grid.empty()) throw ConfigError("tuning grids must be non-empty");
  for (double f : factor_grid) {
    if (!(f > 0.0)) throw ConfigError("peak factor must be positive");
  }
  bool has_va = false;
  bool has_non_va = false;
  for (const auto& seg : train) {
    (seg.main() == iegm::MainCategory::VA ? has_va : has_non_va) = true;
  }
  if (!has_va || !has_non_va) throw TuningError("peak-tree tuning needs both VA and non-VA segments");

  PeakTreeTuning best;
  bool found = false;
  std::vector<std::size_t> counts(train.size());
  for (double factor : factor_grid) {
    // Factors are stored as f32, so tune with the value the model will carry.
    const float stored_factor = static_cast<float>(factor);
    for (std::size_t i = 0; i < train.size(); ++i) {
      counts[i] = count_peaks(train[i].samples, stored_factor, mode);
    }
    for (std::uint32_t threshold : threshold_grid) {
      scoring::ConfusionMatrix cm;
      for (std::size_t i = 0; i < train.size(); ++i) {
        cm.add(train[i].main(),
               counts[i] >= threshold ? iegm::MainCategory::VA : iegm::MainCategory::NonVA);
      }
      const double fb = scoring::f_beta(cm);
      const PeakTreeParams candidate{stored_factor, threshold};
      const bool better =
          !found || fb > best.f_beta ||
          (fb == best.f_beta &&
           (threshold < best.params.peak_threshold ||
            (threshold == best.params.peak_threshold && stored_factor < best.params.factor)));
      if (better) {
        best = {candidate, fb};
        found = true;
      }
    }
  }
  return best;
}

}  // namespace tinyva::detectors
