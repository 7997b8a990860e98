#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tinyva/scoring/metrics.hpp"

namespace tinyva::scoring {

/// One leaderboard row: accuracy, latency and memory terms plus diagnostics.
struct ScoreReport {
  std::string model_name;
  std::uint64_t seed{0};
  std::size_t segments{0};
  ConfusionMatrix confusion;
  double precision{0.0};
  double recall{0.0};
  double f_beta{0.0};
  double avg_latency_ms{0.0};
  double latency_score{0.0};
  double flash_kib{0.0};
  double memory_score{0.0};
  double final_score{0.0};
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::array<std::optional<SubcategoryAccuracy>, iegm::kSubCategoryCount> per_subcategory{};
  double energy_uj_per_inference{0.0};  // active power (mW) * latency (ms)
  bool latency_compliant{true};
  bool memory_compliant{true};

  bool compliant() const noexcept { return latency_compliant && memory_compliant; }
};

/// Builds the full report from per-segment outcomes and the cost terms.
ScoreReport make_report(std::string model_name, std::span<const SubOutcome> results,
                        double avg_latency_ms, double flash_kib, double active_power_mw);

/// Stable key order; byte-identical for identical reports.
std::string to_json(const ScoreReport& report);

/// Fixed column order, see csv_header().
std::string csv_header();
/// Throws ScoringError when the model name contains a comma or line break.
std::string to_csv_row(const ScoreReport& report);

/// Shortest round-trip decimal form.
std::string format_number(double v);

struct LeaderboardRow {
  std::string name;
  double f_beta{0.0};
  double avg_latency_ms{0.0};
  double flash_kib{0.0};
  double final_score{0.0};
  bool compliant{true};
  std::string source;
};

/// Parses a row file written by to_csv_row (header line + one row). Throws
/// LoadError naming the file on malformed content.
LeaderboardRow parse_leaderboard_file(const std::string& text, const std::string& source);

/// Final score descending; ties by name ascending.
void rank_leaderboard(std::vector<LeaderboardRow>& rows);

std::string leaderboard_table(std::span<const LeaderboardRow> rows);
std::string leaderboard_csv(std::span<const LeaderboardRow> rows);

}  // namespace tinyva::scoring
