#include "tinyva/harness/detector.hpp"

#include "tinyva/detectors/cnn.hpp"

namespace tinyva::harness {
namespace {

std::string sample_key(std::span<const float> samples) {
  return {reinterpret_cast<const char*>(samples.data()), samples.size_bytes()};
}

}  // namespace

ModelDetector::ModelDetector(detectors::ModelArtifact model, std::string name)
    : model_(std::move(model)),
      name_(std::move(name)),
      macs_(model_.mac_count()),
      bytes_(model_.serialized_size_bytes()) {}

iegm::MainCategory ModelDetector::infer(std::span<const float> samples) const {
  return detectors::classify(model_, samples);
}

OracleDetector::OracleDetector(std::span<const iegm::IegmSegment> segments) {
  for (const auto& s : segments) truth_.emplace(sample_key(s.samples), s.main());
}

iegm::MainCategory OracleDetector::infer(std::span<const float> samples) const {
  const auto it = truth_.find(sample_key(samples));
  return it == truth_.end() ? iegm::MainCategory::NonVA : it->second;
}

}  // namespace tinyva::harness
