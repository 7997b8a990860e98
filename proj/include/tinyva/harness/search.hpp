#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tinyva/detectors/training.hpp"
#include "tinyva/harness/cost_model.hpp"
#include "tinyva/scoring/report.hpp"

namespace tinyva::harness {

struct SearchOptions {
  int short_epochs{20};
  bool retrain_winner{true};  // retrain the winner with its full epoch budget
  double validation_fraction{0.2};
  std::uint64_t seed{0};
};

enum class CandidateStatus : std::uint8_t { Evaluated, NonCompliant, Dominated };

std::string_view to_string(CandidateStatus s) noexcept;

struct CandidateRecord {
  std::size_t index{0};
  detectors::CnnConfig config;
  CandidateStatus status{CandidateStatus::Evaluated};
  std::uint64_t macs{0};
  std::size_t model_bytes{0};
  double latency_ms{0.0};
  double flash_kib{0.0};
  double latency_score{0.0};
  double memory_score{0.0};
  std::optional<double> f_beta;       // validation F-beta, when trained
  std::optional<double> final_score;  // when trained
};

struct SearchResult {
  std::size_t best_index{0};
  detectors::CnnConfig best_config;
  detectors::ModelArtifact model;
  scoring::ScoreReport validation_report;
  std::vector<CandidateRecord> trace;
};

/// Conv kernel/stride, channel and MLP-width variations around the default detector.
std::vector<detectors::CnnConfig> default_search_space();

/// FS of a detector with the given validation F-beta under the cost model.
double candidate_final_score(double f_beta, std::uint64_t macs, std::size_t model_bytes,
                             const DeviceProfile& profile);

/// Hardware-aware search: each candidate's latency and flash are modeled
/// first; non-compliant candidates are rejected and candidates whose best
/// possible FS cannot beat the incumbent are skipped. The rest are trained
/// with a short budget and scored on a patient-wise validation split. Earlier
/// candidates win ties. Throws SearchError if no candidate is compliant.
SearchResult hardware_aware_search(std::span<const detectors::CnnConfig> space,
                                   std::span<const iegm::IegmSegment> train,
                                   const DeviceProfile& profile, std::size_t budget,
                                   const SearchOptions& options = {});

std::string trace_csv(std::span<const CandidateRecord> trace);

}  // namespace tinyva::harness
