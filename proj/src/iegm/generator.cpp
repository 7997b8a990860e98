#include "tinyva/iegm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tinyva/errors.hpp"
#include "tinyva/random.hpp"

namespace tinyva::iegm {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Per-patient morphology jitter, drawn once per patient.
struct PatientTraits {
  double width_scale{1.0};
  double amplitude_scale{1.0};
  double rate_scale{1.0};
};

ClassProfile spike_class(double bpm_lo, double bpm_hi, double w_lo, double w_hi, double amp_lo,
                         double amp_hi, double irregularity, double weight) {
  ClassProfile c;
  c.bpm_min = bpm_lo;
  c.bpm_max = bpm_hi;
  c.waveform = WaveformKind::BiphasicSpike;
  c.width_min = w_lo;
  c.width_max = w_hi;
  c.amplitude_min = amp_lo;
  c.amplitude_max = amp_hi;
  c.irregularity = irregularity;
  c.weight = weight;
  return c;
}

// Sharp positive deflection followed by a broader, shallower negative lobe.
void add_beat(std::vector<double>& out, double center, double amplitude, double width) {
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const double neg_center = center + 2.2 * width;
  const double neg_width = 1.6 * width;
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - 5.0 * width));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(neg_center + 5.0 * neg_width));
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i < std::min(hi, n); ++i) {
    const double t = static_cast<double>(i);
    const double a = (t - center) / width;
    const double b = (t - neg_center) / neg_width;
    out[static_cast<std::size_t>(i)] +=
        amplitude * (std::exp(-0.5 * a * a) - 0.45 * std::exp(-0.5 * b * b));
  }
}

void beat_train(std::vector<double>& out, const ClassProfile& cls, double bpm, double amplitude,
                double width, Rng& rng) {
  const double rr = 60.0 * kSampleRateHz / bpm;
  const double end = static_cast<double>(out.size()) + 10.0 * width;
  double t = -rr * rng.uniform();
  while (t < end) {
    const double a = amplitude * (1.0 + 0.08 * rng.normal());
    add_beat(out, t, a, width);
    double next = rr * (1.0 + cls.irregularity * rng.uniform(-1.0, 1.0));
    if (cls.ectopic_fraction > 0.0 && rng.bernoulli(cls.ectopic_fraction)) {
      // Premature wide beat, then a compensatory pause.
      add_beat(out, t + 0.6 * rr, 1.3 * a, 2.0 * width);
      next = 2.0 * rr;
    }
    t += std::max(next, 0.3 * rr);
  }
}

// Far-field atrial activity: a few sinusoids in the configured band.
void add_baseline_activity(std::vector<double>& out, const ClassProfile& cls, double amplitude,
                           Rng& rng) {
  if (cls.baseline_fraction <= 0.0) return;
  const int components = cls.irregularity > 0.2 ? 3 : 1;
  for (int k = 0; k < components; ++k) {
    const double hz = rng.uniform(cls.baseline_hz_min, cls.baseline_hz_max);
    const double phase = rng.uniform(0.0, kTwoPi);
    const double amp = cls.baseline_fraction * amplitude / components;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += amp * std::sin(kTwoPi * hz * static_cast<double>(i) / kSampleRateHz + phase);
    }
  }
}

// Periodic pulse exp(kappa * (cos(phase) - 1)); kappa set so the pulse sigma
// matches `width` samples at the given frequency.
double pulse_kappa(double hz, double width) {
  const double samples_per_rad = kSampleRateHz / (kTwoPi * hz);
  return (samples_per_rad / width) * (samples_per_rad / width);
}

void oscillation(std::vector<double>& out, const ClassProfile& cls, double bpm, double amplitude,
                 double width, Rng& rng) {
  const double f_lo = cls.bpm_min / 60.0;
  const double f_hi = cls.bpm_max / 60.0;
  const bool chaotic = cls.waveform == WaveformKind::ChaoticOscillation;
  double hz = bpm / 60.0;
  double phase = rng.uniform(0.0, kTwoPi);
  const double mod_hz = rng.uniform(0.2, 0.8);
  const double mod_phase = rng.uniform(0.0, kTwoPi);
  const double drift = chaotic ? cls.irregularity * 0.08 : cls.irregularity * 0.01;
  for (std::size_t i = 0; i < out.size(); ++i) {
    hz = std::clamp(hz + drift * rng.normal(), f_lo, f_hi);
    phase += kTwoPi * hz / kSampleRateHz;
    const double kappa = pulse_kappa(hz, width);
    const double pulse = std::exp(kappa * (std::cos(phase) - 1.0));
    double envelope = 1.0;
    if (chaotic) {
      envelope = 0.75 + 0.25 * std::sin(kTwoPi * mod_hz * static_cast<double>(i) / kSampleRateHz +
                                        mod_phase);
    }
    out[i] += amplitude * envelope * pulse;
  }
  if (chaotic) {
    // Second weaker, independently drifting component makes the rhythm aperiodic.
    double hz2 = rng.uniform(f_lo, f_hi);
    double phase2 = rng.uniform(0.0, kTwoPi);
    for (std::size_t i = 0; i < out.size(); ++i) {
      hz2 = std::clamp(hz2 + drift * rng.normal(), f_lo, f_hi);
      phase2 += kTwoPi * hz2 / kSampleRateHz;
      out[i] += 0.15 * amplitude * std::sin(phase2);
    }
  }
}

std::vector<float> synthesize(const ClassProfile& cls, std::size_t length,
                              const PatientTraits& traits, Rng& rng) {
  std::vector<double> wave(length, 0.0);
  const double bpm = rng.uniform(cls.bpm_min, cls.bpm_max) * traits.rate_scale;
  const double amplitude =
      rng.uniform(cls.amplitude_min, cls.amplitude_max) * traits.amplitude_scale;
  const double width = rng.uniform(cls.width_min, cls.width_max) * traits.width_scale;

  if (cls.waveform == WaveformKind::BiphasicSpike) {
    beat_train(wave, cls, bpm, amplitude, width, rng);
  } else {
    oscillation(wave, cls, bpm, amplitude, width, rng);
  }
  add_baseline_activity(wave, cls, amplitude, rng);

  // Slow baseline wander plus white sensor noise.
  const double wander_hz = rng.uniform(0.1, 0.5);
  const double wander_phase = rng.uniform(0.0, kTwoPi);
  const double noise_std = cls.noise_std_fraction * amplitude;
  std::vector<float> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    const double v = wave[i] + 0.05 * amplitude * std::sin(kTwoPi * wander_hz * t + wander_phase) +
                     noise_std * rng.normal();
    out[i] = static_cast<float>(v);
  }
  return out;
}

SubCategory draw_label(const RhythmProfile& profile, Rng& rng) {
  double total = 0.0;
  for (const auto& c : profile.classes) total += c.weight;
  double u = rng.uniform() * total;
  for (SubCategory s : kAllSubCategories) {
    const double w = profile[s].weight;
    if (w <= 0.0) continue;
    if (u < w) return s;
    u -= w;
  }
  // Rounding can leave u marginally above the last bucket.
  for (auto it = kAllSubCategories.rbegin(); it != kAllSubCategories.rend(); ++it) {
    if (profile[*it].weight > 0.0) return *it;
  }
  return SubCategory::SR;
}

void require(bool ok, SubCategory s, const char* what) {
  if (!ok) {
    throw ConfigError("invalid rhythm profile for " + std::string(to_string(s)) + ": " + what);
  }
}

}  // namespace

RhythmProfile RhythmProfile::default_profile() {
  RhythmProfile p;
  p[SubCategory::SR] = spike_class(55, 95, 3.0, 4.5, 1.5, 3.0, 0.04, 0.20);
  p[SubCategory::SVT] = spike_class(110, 180, 3.0, 4.5, 1.2, 2.5, 0.03, 0.09);

  auto vpd = spike_class(55, 90, 3.0, 4.5, 1.5, 3.0, 0.05, 0.07);
  vpd.ectopic_fraction = 0.2;
  p[SubCategory::VPD] = vpd;

  auto afb = spike_class(70, 120, 3.0, 4.5, 1.2, 2.5, 0.30, 0.08);
  afb.baseline_fraction = 0.12;
  afb.baseline_hz_min = 5.0;
  afb.baseline_hz_max = 9.0;
  p[SubCategory::AFb] = afb;

  auto aft = spike_class(70, 125, 3.0, 4.5, 1.2, 2.5, 0.05, 0.06);
  aft.baseline_fraction = 0.15;
  aft.baseline_hz_min = 4.0;
  aft.baseline_hz_max = 5.5;
  p[SubCategory::AFt] = aft;

  p[SubCategory::VT] = spike_class(150, 240, 5.0, 8.0, 1.5, 3.5, 0.04, 0.22);

  ClassProfile vfb;
  vfb.bpm_min = 240;
  vfb.bpm_max = 420;
  vfb.waveform = WaveformKind::ChaoticOscillation;
  vfb.amplitude_min = 0.8;
  vfb.amplitude_max = 2.0;
  vfb.irregularity = 0.8;
  vfb.width_min = 3.0;
  vfb.width_max = 4.0;
  vfb.weight = 0.18;
  p[SubCategory::VFb] = vfb;

  ClassProfile vft;
  vft.bpm_min = 240;
  vft.bpm_max = 330;
  vft.waveform = WaveformKind::FlutterSine;
  vft.amplitude_min = 1.0;
  vft.amplitude_max = 2.5;
  vft.irregularity = 0.1;
  vft.width_min = 4.0;
  vft.width_max = 5.0;
  vft.weight = 0.10;
  p[SubCategory::VFt] = vft;

  for (auto& c : p.classes) c.noise_std_fraction = 0.02;
  return p;
}

RhythmProfile RhythmProfile::only(SubCategory label) const {
  RhythmProfile p = *this;
  for (SubCategory s : kAllSubCategories) p[s].weight = s == label ? 1.0 : 0.0;
  return p;
}

void RhythmProfile::validate() const {
  double total = 0.0;
  for (SubCategory s : kAllSubCategories) {
    const auto& c = (*this)[s];
    require(std::isfinite(c.bpm_min) && c.bpm_min > 0.0, s, "bpm_min must be positive");
    require(std::isfinite(c.bpm_max) && c.bpm_max >= c.bpm_min, s, "empty bpm range");
    require(c.amplitude_min > 0.0 && c.amplitude_max >= c.amplitude_min, s,
            "empty amplitude range");
    require(c.width_min > 0.0 && c.width_max >= c.width_min, s, "empty width range");
    require(c.irregularity >= 0.0 && c.irregularity <= 1.0, s, "irregularity outside [0,1]");
    require(c.noise_std_fraction >= 0.0, s, "negative noise fraction");
    require(c.ectopic_fraction >= 0.0 && c.ectopic_fraction <= 1.0, s,
            "ectopic fraction outside [0,1]");
    require(c.baseline_fraction >= 0.0, s, "negative baseline fraction");
    require(c.baseline_hz_min > 0.0 && c.baseline_hz_max >= c.baseline_hz_min, s,
            "empty baseline band");
    require(c.weight >= 0.0 && std::isfinite(c.weight), s, "negative weight");
    total += c.weight;
  }
  if (!(total > 0.0)) throw ConfigError("invalid rhythm profile: all class weights are zero");
  if (episodes_min < 1 || episodes_max < episodes_min) {
    throw ConfigError("invalid rhythm profile: empty episodes-per-patient range");
  }
  if (extra_windows_min < 0 || extra_windows_max < extra_windows_min) {
    throw ConfigError("invalid rhythm profile: empty episode length range");
  }
}

PatientRecording generate_patient(const RhythmProfile& profile, std::string_view patient_id,
                                  std::uint64_t seed) {
  profile.validate();
  Rng rng(derive_seed(seed, patient_id));

  PatientTraits traits;
  traits.width_scale = rng.uniform(0.85, 1.2);
  traits.amplitude_scale = rng.uniform(0.6, 1.6);
  traits.rate_scale = rng.uniform(0.97, 1.03);

  PatientRecording rec;
  rec.patient_id = std::string(patient_id);
  const auto episodes = rng.uniform_int(profile.episodes_min, profile.episodes_max);
  for (std::int64_t e = 0; e < episodes; ++e) {
    const SubCategory label = draw_label(profile, rng);
    const auto extra = rng.uniform_int(profile.extra_windows_min, profile.extra_windows_max);
    const std::size_t length = kSegmentLength + kWindowStride * static_cast<std::size_t>(extra);
    rec.episodes.push_back({label, synthesize(profile[label], length, traits, rng)});
  }
  return rec;
}

std::vector<float> synthesize_rhythm(const ClassProfile& cls, std::size_t length,
                                     std::uint64_t seed) {
  Rng rng(seed);
  return synthesize(cls, length, PatientTraits{}, rng);
}

}  // namespace tinyva::iegm
