#include "tinyva/scoring/metrics.hpp"

#include <cmath>
#include <string>

#include "tinyva/errors.hpp"

namespace tinyva::scoring {

void ConfusionMatrix::add(MainCategory truth, MainCategory predicted) noexcept {
  const bool positive = truth == MainCategory::VA;
  const bool flagged = predicted == MainCategory::VA;
  if (positive) {
    ++(flagged ? tp : fn);
  } else {
    ++(flagged ? fp : tn);
  }
}

ConfusionMatrix confusion(std::span<const Outcome> results) {
  if (results.empty()) throw ScoringError("cannot build a confusion matrix from zero results");
  ConfusionMatrix cm;
  for (const auto& r : results) cm.add(r.truth, r.predicted);
  return cm;
}

double recall(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0) throw ScoringError("recall undefined: no VA ground truth");
  return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
}

double precision(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fp == 0) return 0.0;
  return static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
}

double f_beta(double p, double r, double beta) {
  const double b2 = beta * beta;
  const double denom = b2 * p + r;
  if (denom == 0.0) return 0.0;
  return (1.0 + b2) * p * r / denom;
}

double f_beta(const ConfusionMatrix& cm, double beta) {
  if (cm.tp + cm.fn == 0) throw ScoringError("F-beta undefined: no VA ground truth");
  if (cm.tp == 0) return 0.0;
  return f_beta(precision(cm), recall(cm), beta);
}

double latency_score(double avg_latency_ms) {
  if (!(avg_latency_ms > 0.0) || !std::isfinite(avg_latency_ms)) {
    throw ScoringError("latency must be positive and finite");
  }
  return 1.0 - (avg_latency_ms - kLatencyMinMs) / (kLatencyMaxMs - kLatencyMinMs);
}

double memory_score(double flash_kib) {
  if (!(flash_kib > 0.0) || !std::isfinite(flash_kib)) {
    throw ScoringError("flash footprint must be positive and finite");
  }
  return 1.0 - (flash_kib - kMemoryMinKib) / (kMemoryMaxKib - kMemoryMinKib);
}

double final_score(double f_beta, double latency_score, double memory_score) {
  return 100.0 * f_beta + 20.0 * latency_score + 20.0 * memory_score;
}

bool latency_compliant(double avg_latency_ms) noexcept { return avg_latency_ms <= kLatencyMaxMs; }

bool memory_compliant(double flash_kib) noexcept { return flash_kib <= kMemoryMaxKib; }

ExtendedMetrics extended_metrics(std::span<const SubOutcome> results) {
  if (results.empty()) throw ScoringError("cannot compute metrics from zero results");
  ExtendedMetrics m;
  std::array<SubcategoryAccuracy, iegm::kSubCategoryCount> groups{};
  for (const auto& r : results) {
    const MainCategory truth = iegm::main_category(r.truth);
    m.confusion.add(truth, r.predicted);
    auto& g = groups[iegm::index_of(r.truth)];
    ++g.count;
    if (truth == r.predicted) ++g.correct;
  }
  const auto& cm = m.confusion;
  if (cm.tp + cm.fn > 0) m.sensitivity = recall(cm);
  if (cm.tn + cm.fp > 0) {
    m.specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto g = groups[i];
    if (g.count == 0) continue;
    g.accuracy = static_cast<double>(g.correct) / static_cast<double>(g.count);
    g.insufficient = g.count < kMinSubcategorySupport;
    m.per_subcategory[i] = g;
  }
  return m;
}

}  // namespace tinyva::scoring
