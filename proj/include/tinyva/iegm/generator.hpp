#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "tinyva/iegm/rhythm.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::iegm {

enum class WaveformKind : std::uint8_t {
  BiphasicSpike,       // beat train of sharp biphasic deflections
  ChaoticOscillation,  // drifting, amplitude-modulated oscillation
  FlutterSine,         // steady quasi-sinusoidal oscillation
};

/// Synthesis parameters for one sub-category.
///
/// For oscillation kinds the bpm range is the oscillation frequency times 60.
/// Widths are Gaussian sigmas in samples.
struct ClassProfile {
  double bpm_min{60.0};
  double bpm_max{100.0};
  WaveformKind waveform{WaveformKind::BiphasicSpike};
  double amplitude_min{1.0};
  double amplitude_max{2.0};
  double irregularity{0.0};
  double noise_std_fraction{0.02};
  double width_min{3.0};
  double width_max{5.0};
  double ectopic_fraction{0.0};     // premature wide beats per normal beat
  double baseline_fraction{0.0};    // far-field atrial activity amplitude
  double baseline_hz_min{4.0};
  double baseline_hz_max{6.0};
  double weight{1.0};               // relative episode frequency
};

struct RhythmProfile {
  std::array<ClassProfile, kSubCategoryCount> classes{};
  int episodes_min{3};
  int episodes_max{6};
  // Episode length is kSegmentLength + kWindowStride * k, k uniform in this range.
  int extra_windows_min{4};
  int extra_windows_max{24};

  ClassProfile& operator[](SubCategory s) { return classes[index_of(s)]; }
  const ClassProfile& operator[](SubCategory s) const { return classes[index_of(s)]; }

  /// Ventricular rates above sinus rates, roughly balanced VA/non-VA mix.
  static RhythmProfile default_profile();

  /// Profile whose episodes all carry `label`.
  RhythmProfile only(SubCategory label) const;

  /// Throws ConfigError on empty/negative ranges or an all-zero class mix.
  void validate() const;
};

/// Deterministic in (profile, patient_id, seed).
PatientRecording generate_patient(const RhythmProfile& profile, std::string_view patient_id,
                                  std::uint64_t seed);

/// Synthesizes a single labelled waveform of `length` samples. Exposed for tests
/// and tools that need a specific rhythm without the episode mix.
std::vector<float> synthesize_rhythm(const ClassProfile& cls, std::size_t length,
                                     std::uint64_t seed);

}  // namespace tinyva::iegm
