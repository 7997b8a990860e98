#include "tinyva/harness/cost_model.hpp"

#include <cmath>

#include "tinyva/errors.hpp"

namespace tinyva::harness {

void DeviceProfile::validate() const {
  const bool positive = clock_hz > 0.0 && flash_kib > 0.0 && sram_kib > 0.0 &&
                        base_program_kib > 0.0 && cycles_per_mac > 0.0 &&
                        per_inference_overhead_cycles > 0 && active_power_mw > 0.0 &&
                        idle_power_mw > 0.0;
  if (!positive) throw ConfigError("device profile values must all be positive");
  if (flash_kib < base_program_kib) throw ConfigError("device flash is smaller than the base program");
}

double modeled_latency_ms(std::uint64_t mac_count, const DeviceProfile& profile) {
  const double cycles = static_cast<double>(mac_count) * profile.cycles_per_mac +
                        static_cast<double>(profile.per_inference_overhead_cycles);
  return cycles / (profile.clock_hz / 1000.0);
}

double modeled_latency_ms(const detectors::ModelArtifact& model, const DeviceProfile& profile) {
  return modeled_latency_ms(model.mac_count(), profile);
}

std::uint32_t modeled_latency_us(std::uint64_t mac_count, const DeviceProfile& profile) {
  return static_cast<std::uint32_t>(std::llround(modeled_latency_ms(mac_count, profile) * 1000.0));
}

std::uint64_t flash_footprint_bytes(std::size_t model_bytes, const DeviceProfile& profile) {
  return static_cast<std::uint64_t>(std::llround(profile.base_program_kib * 1024.0)) + model_bytes;
}

double flash_footprint_kib(std::size_t model_bytes, const DeviceProfile& profile) {
  return profile.base_program_kib + static_cast<double>(model_bytes) / 1024.0;
}

double flash_footprint_kib(const detectors::ModelArtifact& model, const DeviceProfile& profile) {
  return flash_footprint_kib(model.serialized_size_bytes(), profile);
}

bool flash_compliant(double flash_kib, const DeviceProfile& profile) noexcept {
  return flash_kib <= profile.flash_kib;
}

double energy_uj(double latency_ms, const DeviceProfile& profile) noexcept {
  return profile.active_power_mw * latency_ms;
}

}  // namespace tinyva::harness
