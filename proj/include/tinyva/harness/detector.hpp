#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>

#include "tinyva/detectors/model.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::harness {

/// The inference entry point a device exposes. Implementations are immutable
/// and safe to share across sessions.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual iegm::MainCategory infer(std::span<const float> samples) const = 0;
  virtual std::uint64_t mac_count() const = 0;
  /// Bytes of model data placed in flash next to the base program.
  virtual std::size_t model_bytes() const = 0;
  virtual std::string name() const = 0;
};

class ModelDetector final : public Detector {
 public:
  ModelDetector(detectors::ModelArtifact model, std::string name);

  iegm::MainCategory infer(std::span<const float> samples) const override;
  std::uint64_t mac_count() const override { return macs_; }
  std::size_t model_bytes() const override { return bytes_; }
  std::string name() const override { return name_; }

  const detectors::ModelArtifact& model() const noexcept { return model_; }

 private:
  detectors::ModelArtifact model_;
  std::string name_;
  std::uint64_t macs_;
  std::size_t bytes_;
};

/// Harness self-test device that answers with the ground truth of segments it
/// was built from, looked up by sample content. Zero MACs, zero model bytes.
class OracleDetector final : public Detector {
 public:
  explicit OracleDetector(std::span<const iegm::IegmSegment> segments);

  iegm::MainCategory infer(std::span<const float> samples) const override;
  std::uint64_t mac_count() const override { return 0; }
  std::size_t model_bytes() const override { return 0; }
  std::string name() const override { return "oracle"; }

 private:
  std::unordered_map<std::string, iegm::MainCategory> truth_;
};

class ConstantDetector final : public Detector {
 public:
  explicit ConstantDetector(iegm::MainCategory answer) : answer_(answer) {}

  iegm::MainCategory infer(std::span<const float>) const override { return answer_; }
  std::uint64_t mac_count() const override { return 0; }
  std::size_t model_bytes() const override { return 0; }
  std::string name() const override {
    return answer_ == iegm::MainCategory::VA ? "always_va" : "always_nonva";
  }

 private:
  iegm::MainCategory answer_;
};

}  // namespace tinyva::harness
