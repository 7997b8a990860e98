#pragma once

#include <cstdint>

#include "tinyva/detectors/model.hpp"

namespace tinyva::harness {

/// Cortex-M4 class evaluation board. Latency and flash are modeled from MAC
/// counts and serialized model bytes; the calibration constants are config.
struct DeviceProfile {
  double clock_hz{8.0e7};
  double flash_kib{256.0};
  double sram_kib{64.0};
  double base_program_kib{5.0};
  double cycles_per_mac{2.0};
  std::uint64_t per_inference_overhead_cycles{10'000};
  double active_power_mw{30.0};
  double idle_power_mw{1.5};

  /// Throws ConfigError unless all values are positive and flash >= base program.
  void validate() const;
};

double modeled_latency_ms(std::uint64_t mac_count, const DeviceProfile& profile);
double modeled_latency_ms(const detectors::ModelArtifact& model, const DeviceProfile& profile);

/// Latency rounded to whole microseconds, as carried on the wire.
std::uint32_t modeled_latency_us(std::uint64_t mac_count, const DeviceProfile& profile);

/// Base program plus model bytes, in bytes (flash_kib * 1024).
std::uint64_t flash_footprint_bytes(std::size_t model_bytes, const DeviceProfile& profile);
double flash_footprint_kib(std::size_t model_bytes, const DeviceProfile& profile);
double flash_footprint_kib(const detectors::ModelArtifact& model, const DeviceProfile& profile);

bool flash_compliant(double flash_kib, const DeviceProfile& profile) noexcept;

/// mW * ms = uJ.
double energy_uj(double latency_ms, const DeviceProfile& profile) noexcept;

}  // namespace tinyva::harness
