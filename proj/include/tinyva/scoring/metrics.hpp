#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "tinyva/iegm/rhythm.hpp"

namespace tinyva::scoring {

using iegm::MainCategory;
using iegm::SubCategory;

/// Binary confusion matrix with VA as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp{0};
  std::uint64_t fn{0};
  std::uint64_t fp{0};
  std::uint64_t tn{0};

  std::uint64_t total() const noexcept { return tp + fn + fp + tn; }
  void add(MainCategory truth, MainCategory predicted) noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Outcome {
  MainCategory truth;
  MainCategory predicted;
};

/// Throws ScoringError on an empty result list.
ConfusionMatrix confusion(std::span<const Outcome> results);

inline constexpr double kDefaultBeta = 2.0;

inline constexpr double kLatencyMinMs = 1.0;
inline constexpr double kLatencyMaxMs = 200.0;
inline constexpr double kMemoryMinKib = 5.0;
inline constexpr double kMemoryMaxKib = 256.0;

/// tp / (tp + fn). Throws ScoringError without positive ground truth.
double recall(const ConfusionMatrix& cm);
/// tp / (tp + fp); 0 when nothing was predicted positive.
double precision(const ConfusionMatrix& cm);

/// (1 + b^2) P R / (b^2 P + R). Zero whenever tp == 0. Throws ScoringError
/// when tp + fn == 0.
double f_beta(const ConfusionMatrix& cm, double beta = kDefaultBeta);
/// Same formula from precision and recall directly; 0 when both are 0.
double f_beta(double precision, double recall, double beta = kDefaultBeta);

/// 1 - (L - 1) / (200 - 1). Sub-millisecond latencies score above 1; no clamping.
double latency_score(double avg_latency_ms);
/// 1 - (M - 5) / (256 - 5). No clamping.
double memory_score(double flash_kib);
/// 100 F + 20 L + 20 M; at most 140 for compliant, bounded inputs.
double final_score(double f_beta, double latency_score, double memory_score);

bool latency_compliant(double avg_latency_ms) noexcept;
bool memory_compliant(double flash_kib) noexcept;

struct SubOutcome {
  SubCategory truth;
  MainCategory predicted;
};

/// Groups with fewer segments are flagged as statistically insufficient.
inline constexpr std::size_t kMinSubcategorySupport = 50;

struct SubcategoryAccuracy {
  std::size_t count{0};
  std::size_t correct{0};
  double accuracy{0.0};
  bool insufficient{true};

  friend bool operator==(const SubcategoryAccuracy&, const SubcategoryAccuracy&) = default;
};

struct ExtendedMetrics {
  ConfusionMatrix confusion;
  std::optional<double> sensitivity;  // undefined without VA segments
  std::optional<double> specificity;  // undefined without non-VA segments
  std::array<std::optional<SubcategoryAccuracy>, iegm::kSubCategoryCount> per_subcategory{};
};

/// Throws ScoringError on empty input.
ExtendedMetrics extended_metrics(std::span<const SubOutcome> results);

}  // namespace tinyva::scoring
