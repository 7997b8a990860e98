#include "tinyva/harness/search.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "tinyva/errors.hpp"
#include "tinyva/harness/detector.hpp"
#include "tinyva/harness/session.hpp"
#include "tinyva/iegm/dataset.hpp"
#include "tinyva/random.hpp"
#include "tinyva/scoring/metrics.hpp"

namespace tinyva::harness {
namespace {

struct ValidationSplit {
  std::vector<iegm::IegmSegment> fit;
  std::vector<iegm::IegmSegment> validation;
};

ValidationSplit split_for_validation(std::span<const iegm::IegmSegment> train, double fraction,
                                     std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("validation fraction must be in (0, 1)");
  }
  std::set<std::string> ids;
  for (const auto& s : train) ids.insert(s.patient_id);
  const std::vector<std::string> patients(ids.begin(), ids.end());
  if (patients.size() < 2) throw SearchError("search needs at least two training patients");
  const auto manifest = iegm::partition_patients(patients, 1.0 - fraction, derive_seed(seed, "validation"));
  ValidationSplit split;
  for (const auto& s : train) {
    (manifest.in_train(s.patient_id) ? split.fit : split.validation).push_back(s);
  }
  return split;
}

detectors::ModelArtifact train_with_epochs(detectors::CnnConfig config, int epochs,
                                           std::span<const iegm::IegmSegment> data,
                                           std::uint64_t seed) {
  config.training.epochs = epochs;
  config.training.swa_start_epoch = std::min(config.training.swa_start_epoch, epochs);
  return detectors::train_cnn(config, data, seed).model;
}

std::string describe(const detectors::CnnConfig& c) {
  std::ostringstream os;
  os << "k" << c.kernel_size << "s" << c.stride << "c" << c.out_channels << "h";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) os << (i ? "-" : "") << c.hidden[i];
  return os.str();
}

}  // namespace

std::string_view to_string(CandidateStatus s) noexcept {
  switch (s) {
    case CandidateStatus::Evaluated:
      return "evaluated";
    case CandidateStatus::NonCompliant:
      return "non_compliant";
    case CandidateStatus::Dominated:
      return "dominated";
  }
  return "unknown";
}

std::vector<detectors::CnnConfig> default_search_space() {
  struct ConvShape {
    std::size_t kernel, stride;
  };
  const ConvShape shapes[] = {{85, 32}, {64, 32}, {85, 16}};
  const std::size_t channels[] = {3, 6};
  const std::vector<std::size_t> hidden[] = {{20, 10}, {10}};
  std::vector<detectors::CnnConfig> space;
  for (std::size_t ch : channels) {
    for (const auto& shape : shapes) {
      for (const auto& h : hidden) {
        detectors::CnnConfig c;
        c.out_channels = ch;
        c.kernel_size = shape.kernel;
        c.stride = shape.stride;
        c.hidden = h;
        space.push_back(c);
      }
    }
  }
  return space;
}

double candidate_final_score(double f_beta, std::uint64_t macs, std::size_t model_bytes,
                             const DeviceProfile& profile) {
  const double latency_ms = modeled_latency_us(macs, profile) / 1000.0;
  const double flash_kib = flash_footprint_bytes(model_bytes, profile) / 1024.0;
  return scoring::final_score(f_beta, scoring::latency_score(latency_ms),
                              scoring::memory_score(flash_kib));
}

SearchResult hardware_aware_search(std::span<const detectors::CnnConfig> space,
                                   std::span<const iegm::IegmSegment> train,
                                   const DeviceProfile& profile, std::size_t budget,
                                   const SearchOptions& options) {
  if (space.empty()) throw ConfigError("search space is empty");
  if (budget < 1) throw ConfigError("search budget must be >= 1");
  if (options.short_epochs < 1) throw ConfigError("short training budget must be >= 1 epoch");
  profile.validate();

  const auto split = split_for_validation(train, options.validation_fraction, options.seed);
  const std::size_t n = std::min(budget, space.size());

  SearchResult result;
  std::optional<double> best_fs;
  std::string violations;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& config = space[i];
    config.validate();
    CandidateRecord rec;
    rec.index = i;
    rec.config = config;
    const detectors::ModelArtifact shape(config.zero_model());
    rec.macs = shape.mac_count();
    rec.model_bytes = shape.serialized_size_bytes();
    rec.latency_ms = modeled_latency_us(rec.macs, profile) / 1000.0;
    rec.flash_kib = flash_footprint_bytes(rec.model_bytes, profile) / 1024.0;
    rec.latency_score = scoring::latency_score(rec.latency_ms);
    rec.memory_score = scoring::memory_score(rec.flash_kib);

    if (!scoring::latency_compliant(rec.latency_ms) || !scoring::memory_compliant(rec.flash_kib) ||
        !flash_compliant(rec.flash_kib, profile)) {
      rec.status = CandidateStatus::NonCompliant;
      violations += "\n  candidate " + std::to_string(i) + " (" + describe(config) +
                    "): latency " + scoring::format_number(rec.latency_ms) + " ms, flash " +
                    scoring::format_number(rec.flash_kib) + " KiB";
      result.trace.push_back(rec);
      continue;
    }
    const double upper_bound = scoring::final_score(1.0, rec.latency_score, rec.memory_score);
    if (best_fs && upper_bound <= *best_fs) {
      rec.status = CandidateStatus::Dominated;
      result.trace.push_back(rec);
      continue;
    }

    const auto seed = derive_seed(options.seed, i);
    auto model = train_with_epochs(config, options.short_epochs, split.fit, seed);
    const ModelDetector detector(model, describe(config));
    auto report = evaluate_direct(detector, split.validation, profile, describe(config), seed);
    rec.f_beta = report.f_beta;
    rec.final_score = report.final_score;
    if (!best_fs || report.final_score > *best_fs) {
      best_fs = report.final_score;
      result.best_index = i;
      result.best_config = config;
      result.model = std::move(model);
      result.validation_report = std::move(report);
    }
    result.trace.push_back(rec);
  }

  if (!best_fs) throw SearchError("no compliant candidate in the search space:" + violations);

  if (options.retrain_winner && result.best_config.training.epochs > options.short_epochs) {
    const auto seed = derive_seed(options.seed, result.best_index);
    result.model = detectors::train_cnn(result.best_config, split.fit, seed).model;
    const ModelDetector detector(result.model, describe(result.best_config));
    result.validation_report = evaluate_direct(detector, split.validation, profile,
                                               describe(result.best_config), seed);
  }
  return result;
}

std::string trace_csv(std::span<const CandidateRecord> trace) {
  std::ostringstream os;
  os << "index,kernel,stride,out_channels,hidden,status,macs,model_bytes,latency_ms,flash_kib,"
        "latency_score,memory_score,f_beta,final_score\n";
  auto opt = [](const std::optional<double>& v) {
    return v ? scoring::format_number(*v) : std::string();
  };
  for (const auto& r : trace) {
    std::string hidden;
    for (std::size_t i = 0; i < r.config.hidden.size(); ++i) {
      hidden += (i ? "-" : "") + std::to_string(r.config.hidden[i]);
    }
    os << r.index << ',' << r.config.kernel_size << ',' << r.config.stride << ','
       << r.config.out_channels << ',' << hidden << ',' << to_string(r.status) << ',' << r.macs
       << ',' << r.model_bytes << ',' << scoring::format_number(r.latency_ms) << ','
       << scoring::format_number(r.flash_kib) << ',' << scoring::format_number(r.latency_score)
       << ',' << scoring::format_number(r.memory_score) << ',' << opt(r.f_beta) << ','
       << opt(r.final_score) << '\n';
  }
  return os.str();
}

}  // namespace tinyva::harness
