#include "tinyva/detectors/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tinyva/detectors/cnn.hpp"
#include "tinyva/errors.hpp"

namespace tinyva::detectors {
namespace {

std::vector<std::int8_t> quantize_weights(const std::vector<float>& w, const QuantParams& q) {
  std::vector<std::int8_t> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = quantize_weight(w[i], q);
  return out;
}

std::vector<std::int32_t> quantize_bias(const std::vector<float>& b, double scale) {
  std::vector<std::int32_t> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = std::nearbyint(b[i] / scale);
    constexpr double lo = std::numeric_limits<std::int32_t>::min();
    constexpr double hi = std::numeric_limits<std::int32_t>::max();
    out[i] = static_cast<std::int32_t>(std::clamp(v, lo, hi));
  }
  return out;
}

}  // namespace

QuantParams symmetric_weight_params(std::span<const float> weights) {
  float max_abs = 0.0f;
  for (float w : weights) max_abs = std::max(max_abs, std::fabs(w));
  return {max_abs > 0.0f ? max_abs / 127.0f : 1.0f / 127.0f, 0};
}

QuantParams activation_params(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  double scale = (hi - lo) / 255.0;
  if (!(scale > 0.0)) scale = 1.0 / 255.0;
  const auto zp = static_cast<std::int32_t>(std::clamp(std::nearbyint(-lo / scale), 0.0, 255.0));
  return {static_cast<float>(scale), zp};
}

std::int8_t quantize_weight(float w, const QuantParams& q) {
  const double v = std::nearbyint(static_cast<double>(w) / q.scale);
  return static_cast<std::int8_t>(std::clamp(v, -127.0, 127.0));
}

std::uint8_t quantize_activation(double x, const QuantParams& q) {
  const double v = std::nearbyint(x / q.scale) + q.zero_point;
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

FixedPointMultiplier to_fixed_point(double real) {
  if (!(real > 0.0) || !std::isfinite(real)) throw ModelError("requantization scale must be positive");
  int exponent = 0;
  const double fraction = std::frexp(real, &exponent);  // real = fraction * 2^exponent
  auto m = static_cast<std::int64_t>(std::nearbyint(fraction * 2147483648.0));
  if (m == (std::int64_t{1} << 31)) {
    m /= 2;
    ++exponent;
  }
  const int shift = 31 - exponent;
  if (shift < 1) throw ModelError("requantization scale out of fixed-point range");
  if (shift > 62) return {0, 62};  // below int32 resolution
  return {static_cast<std::int32_t>(m), shift};
}

std::int32_t apply_multiplier(std::int32_t acc, const FixedPointMultiplier& m) {
  const std::int64_t prod = static_cast<std::int64_t>(acc) * m.multiplier;
  const std::int64_t rounded = (prod + (std::int64_t{1} << (m.shift - 1))) >> m.shift;
  return static_cast<std::int32_t>(
      std::clamp<std::int64_t>(rounded, std::numeric_limits<std::int32_t>::min(),
                               std::numeric_limits<std::int32_t>::max()));
}

QuantizedCnn quantize_int8(const FloatCnn& model, std::span<const iegm::IegmSegment> calibration) {
  if (calibration.empty()) throw ConfigError("int8 quantization needs at least one calibration segment");
  model.validate();

  // Observed [min, max] of every activation stage.
  const std::size_t stages = 2 + (model.dense.size() - 1);
  std::vector<double> lo(stages, std::numeric_limits<double>::infinity());
  std::vector<double> hi(stages, -std::numeric_limits<double>::infinity());
  for (const auto& seg : calibration) {
    const auto trace = activation_trace(model, seg.samples);
    for (std::size_t s = 0; s < stages; ++s) {
      const auto [mn, mx] = std::minmax_element(trace[s].begin(), trace[s].end());
      lo[s] = std::min(lo[s], *mn);
      hi[s] = std::max(hi[s], *mx);
    }
  }

  QuantizedCnn q;
  q.input_length = model.input_length;
  q.input_q = activation_params(lo[0], hi[0]);
  q.conv_out_q = activation_params(lo[1], hi[1]);
  for (std::size_t s = 2; s < stages; ++s) q.hidden_out_q.push_back(activation_params(lo[s], hi[s]));

  const auto& c = model.conv;
  q.conv.in_channels = c.in_channels;
  q.conv.out_channels = c.out_channels;
  q.conv.kernel = c.kernel;
  q.conv.stride = c.stride;
  q.conv.weight_q = symmetric_weight_params(c.weights);
  q.conv.weights = quantize_weights(c.weights, q.conv.weight_q);
  q.conv.bias = quantize_bias(c.bias, static_cast<double>(q.input_q.scale) * q.conv.weight_q.scale);

  QuantParams in_q = q.conv_out_q;
  for (std::size_t l = 0; l < model.dense.size(); ++l) {
    const auto& d = model.dense[l];
    QuantDenseLayer qd;
    qd.inputs = d.inputs;
    qd.outputs = d.outputs;
    qd.weight_q = symmetric_weight_params(d.weights);
    qd.weights = quantize_weights(d.weights, qd.weight_q);
    qd.bias = quantize_bias(d.bias, static_cast<double>(in_q.scale) * qd.weight_q.scale);
    q.dense.push_back(std::move(qd));
    if (l < q.hidden_out_q.size()) in_q = q.hidden_out_q[l];
  }
  q.validate();
  return q;
}

ModelArtifact quantize_int8(const ModelArtifact& model, std::span<const iegm::IegmSegment> calibration) {
  return ModelArtifact(quantize_int8(model.float_cnn(), calibration));
}

}  // namespace tinyva::detectors
