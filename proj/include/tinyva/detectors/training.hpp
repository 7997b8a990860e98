#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tinyva/detectors/cnn.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::detectors {

/// Double-precision trainable copy of the Conv1D + MLP network.
///
/// Parameters live in one flat vector in flatten_parameters() order.
class CnnNetwork {
 public:
  /// Glorot-uniform weights and zero biases.
  CnnNetwork(const CnnConfig& config, std::uint64_t seed);
  explicit CnnNetwork(const FloatCnn& model);

  struct Example {
    std::span<const float> samples;
    iegm::MainCategory label;
  };

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  /// Mean softmax cross-entropy over `batch`; writes d(loss)/d(params) into
  /// `gradient` (resized to parameter count).
  double loss_and_gradient(std::span<const Example> batch, std::vector<double>& gradient) const;
  double loss(std::span<const Example> batch) const;

  FloatCnn to_float() const;

 private:
  struct Layout {
    std::size_t conv_w, conv_b;
    std::vector<std::size_t> dense_w, dense_b;
  };

  double example_pass(const Example& ex, std::vector<double>* gradient, double weight) const;

  std::size_t input_length_;
  std::size_t in_channels_, out_channels_, kernel_, stride_, positions_;
  std::vector<std::size_t> widths_;  // dense layer output sizes
  Layout layout_;
  std::vector<double> params_;
};

struct TrainingOptions {
  /// Retain every parameter snapshot that entered the weight average.
  bool keep_swa_snapshots{false};
};

struct TrainingReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_learning_rate;
  int swa_snapshots{0};
  std::uint64_t seed{0};
  std::vector<std::vector<double>> snapshots;  // only with keep_swa_snapshots
};

struct TrainingResult {
  ModelArtifact model;
  FloatCnn initial;
  TrainingReport report;
};

/// Cosine-annealed Adam on softmax cross-entropy with on-the-fly augmentation.
/// Weights from epochs >= swa_start_epoch are averaged with equal weight and
/// the average is returned. Throws TrainingError on a non-finite loss.
TrainingResult train_cnn(const CnnConfig& config, std::span<const iegm::IegmSegment> train,
                         std::uint64_t seed, const TrainingOptions& options = {});

/// lr0 * (1 + cos(pi * epoch / epochs)) / 2, epoch counted from 0.
double cosine_learning_rate(double initial, int epoch, int epochs);

}  // namespace tinyva::detectors
