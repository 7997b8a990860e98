#include "tinyva/detectors/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tinyva/detectors/quantize.hpp"
#include "tinyva/errors.hpp"

namespace tinyva::detectors {
namespace {

void check_input(std::size_t expected, std::span<const float> samples) {
  if (samples.size() != expected) {
    throw ModelError("model expects " + std::to_string(expected) + " samples, got " +
                     std::to_string(samples.size()));
  }
}

// Runs the float network, calling `observe` with each post-activation stage.
template <typename Observe>
Logits run_float(const FloatCnn& m, std::span<const float> x, Observe&& observe) {
  m.validate();
  check_input(m.input_length, x);
  const std::size_t positions = m.conv_positions();
  const auto& conv = m.conv;

  std::vector<double> act(conv.out_channels * positions);
  for (std::size_t c = 0; c < conv.out_channels; ++c) {
    const float* w = conv.weights.data() + c * conv.kernel;
    for (std::size_t p = 0; p < positions; ++p) {
      const float* in = x.data() + p * conv.stride;
      double acc = conv.bias[c];
      for (std::size_t k = 0; k < conv.kernel; ++k) acc += static_cast<double>(w[k]) * in[k];
      act[c * positions + p] = std::max(acc, 0.0);
    }
  }
  observe(act);

  std::vector<double> next;
  for (std::size_t l = 0; l < m.dense.size(); ++l) {
    const auto& d = m.dense[l];
    const bool last = l + 1 == m.dense.size();
    next.assign(d.outputs, 0.0);
    for (std::size_t o = 0; o < d.outputs; ++o) {
      const float* w = d.weights.data() + o * d.inputs;
      double acc = d.bias[o];
      for (std::size_t i = 0; i < d.inputs; ++i) acc += static_cast<double>(w[i]) * act[i];
      next[o] = last ? acc : std::max(acc, 0.0);
    }
    act.swap(next);
    if (!last) observe(act);
  }
  return {static_cast<float>(act[0]), static_cast<float>(act[1])};
}

std::uint8_t requantize_relu(std::int32_t acc, const FixedPointMultiplier& m, std::int32_t zero_point) {
  const std::int64_t v = static_cast<std::int64_t>(zero_point) + apply_multiplier(acc, m);
  return static_cast<std::uint8_t>(std::clamp<std::int64_t>(v, std::max(zero_point, 0), 255));
}

}  // namespace

void TrainingConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (swa_start_epoch < 1) throw ConfigError("SWA start epoch must be >= 1");
  if (!(noise_sigma_fraction >= 0.0)) throw ConfigError("noise sigma fraction must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
        adam_epsilon > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

std::size_t CnnConfig::conv_positions() const noexcept {
  if (kernel_size == 0 || stride == 0 || input_length < kernel_size) return 0;
  return (input_length - kernel_size) / stride + 1;
}

void CnnConfig::validate() const {
  if (input_channels != 1) throw ConfigError("only single-lead input is supported");
  if (kernel_size == 0 || stride == 0 || out_channels == 0) {
    throw ConfigError("conv kernel, stride and channels must be >= 1");
  }
  if (conv_positions() < 1) throw ConfigError("conv kernel longer than the input");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer sizes must be >= 1");
  }
  if (outputs != 2) throw ConfigError("the detector has exactly 2 outputs");
  training.validate();
}

FloatCnn CnnConfig::zero_model() const {
  validate();
  FloatCnn m;
  m.input_length = input_length;
  m.conv = {input_channels, out_channels, kernel_size, stride,
            std::vector<float>(out_channels * input_channels * kernel_size, 0.0f),
            std::vector<float>(out_channels, 0.0f)};
  std::size_t width = out_channels * conv_positions();
  std::vector<std::size_t> widths = hidden;
  widths.push_back(outputs);
  for (auto w : widths) {
    m.dense.push_back({width, w, std::vector<float>(width * w, 0.0f), std::vector<float>(w, 0.0f)});
    width = w;
  }
  return m;
}

Logits cnn_forward(const FloatCnn& model, std::span<const float> samples) {
  return run_float(model, samples, [](const std::vector<double>&) {});
}

std::vector<std::vector<double>> activation_trace(const FloatCnn& model,
                                                  std::span<const float> samples) {
  std::vector<std::vector<double>> trace;
  trace.emplace_back(samples.begin(), samples.end());
  run_float(model, samples, [&](const std::vector<double>& a) { trace.push_back(a); });
  return trace;
}

Logits cnn_forward(const QuantizedCnn& m, std::span<const float> x) {
  m.validate();
  check_input(m.input_length, x);
  const std::size_t positions = m.conv_positions();
  const auto& conv = m.conv;

  std::vector<std::uint8_t> in(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in[i] = quantize_activation(x[i], m.input_q);

  const auto conv_mult = to_fixed_point(static_cast<double>(m.input_q.scale) * conv.weight_q.scale /
                                        m.conv_out_q.scale);
  std::vector<std::uint8_t> act(conv.out_channels * positions);
  for (std::size_t c = 0; c < conv.out_channels; ++c) {
    const std::int8_t* w = conv.weights.data() + c * conv.kernel;
    for (std::size_t p = 0; p < positions; ++p) {
      const std::uint8_t* src = in.data() + p * conv.stride;
      std::int32_t acc = conv.bias[c];
      for (std::size_t k = 0; k < conv.kernel; ++k) {
        acc += (static_cast<std::int32_t>(src[k]) - m.input_q.zero_point) * w[k];
      }
      act[c * positions + p] = requantize_relu(acc, conv_mult, m.conv_out_q.zero_point);
    }
  }

  QuantParams act_q = m.conv_out_q;
  std::vector<std::uint8_t> next;
  for (std::size_t l = 0; l < m.dense.size(); ++l) {
    const auto& d = m.dense[l];
    const bool last = l + 1 == m.dense.size();
    std::vector<std::int32_t> accs(d.outputs);
    for (std::size_t o = 0; o < d.outputs; ++o) {
      const std::int8_t* w = d.weights.data() + o * d.inputs;
      std::int32_t acc = d.bias[o];
      for (std::size_t i = 0; i < d.inputs; ++i) {
        acc += (static_cast<std::int32_t>(act[i]) - act_q.zero_point) * w[i];
      }
      accs[o] = acc;
    }
    if (last) {
      const double scale = static_cast<double>(act_q.scale) * d.weight_q.scale;
      return {static_cast<float>(accs[0] * scale), static_cast<float>(accs[1] * scale)};
    }
    const QuantParams& out_q = m.hidden_out_q[l];
    const auto mult =
        to_fixed_point(static_cast<double>(act_q.scale) * d.weight_q.scale / out_q.scale);
    next.resize(d.outputs);
    for (std::size_t o = 0; o < d.outputs; ++o) {
      next[o] = requantize_relu(accs[o], mult, out_q.zero_point);
    }
    act.swap(next);
    act_q = out_q;
  }
  return {};
}

Logits cnn_forward(const ModelArtifact& model, std::span<const float> samples) {
  switch (model.kind()) {
    case ModelKind::CnnF32:
      return cnn_forward(model.float_cnn(), samples);
    case ModelKind::CnnInt8:
      return cnn_forward(model.quantized_cnn(), samples);
    case ModelKind::PeakTree:
      break;
  }
  throw ModelError("cnn_forward called on a peak-tree model");
}

iegm::MainCategory classify(const ModelArtifact& model, std::span<const float> samples) {
  if (model.kind() == ModelKind::PeakTree) return peak_tree_classify(samples, model.peak_tree());
  return cnn_forward(model, samples).predicted();
}

}  // namespace tinyva::detectors
