#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tinyva/detectors/model.hpp"
#include "tinyva/iegm/augment.hpp"

namespace tinyva::detectors {

struct TrainingConfig {
  int epochs{100};
  double learning_rate{2e-4};  // initial value of the cosine schedule
  int batch_size{32};
  int swa_start_epoch{10};     // 1-based; snapshots after epochs >= this are averaged
  double adam_beta1{0.9};
  double adam_beta2{0.999};
  double adam_epsilon{1e-8};
  bool augment_flip{true};
  iegm::FlipMode flip_mode{iegm::FlipMode::Amplitude};
  double noise_sigma_fraction{0.05};

  void validate() const;
};

/// Conv1D + MLP detector shape plus its training recipe.
struct CnnConfig {
  std::size_t input_length{iegm::kSegmentLength};
  std::size_t input_channels{1};
  std::size_t kernel_size{85};
  std::size_t stride{32};
  std::size_t out_channels{3};
  std::vector<std::size_t> hidden{20, 10};
  std::size_t outputs{2};
  TrainingConfig training;

  std::size_t conv_positions() const noexcept;
  /// Throws ConfigError unless every layer is non-empty and the conv fits the input.
  void validate() const;
  /// Untrained model with this shape and zero parameters.
  FloatCnn zero_model() const;
};

struct Logits {
  float non_va{0.0f};
  float va{0.0f};

  /// argmax; an exact tie resolves to NonVA.
  iegm::MainCategory predicted() const noexcept {
    return va > non_va ? iegm::MainCategory::VA : iegm::MainCategory::NonVA;
  }
};

Logits cnn_forward(const FloatCnn& model, std::span<const float> samples);
Logits cnn_forward(const QuantizedCnn& model, std::span<const float> samples);
/// Throws ModelError for peak-tree artifacts.
Logits cnn_forward(const ModelArtifact& model, std::span<const float> samples);

/// Any model kind.
iegm::MainCategory classify(const ModelArtifact& model, std::span<const float> samples);

/// Post-activation outputs of every hidden stage, used for calibration:
/// [input, conv (after ReLU), hidden dense outputs (after ReLU)...].
std::vector<std::vector<double>> activation_trace(const FloatCnn& model,
                                                  std::span<const float> samples);

}  // namespace tinyva::detectors
