#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tinyva/bytes.hpp"
#include "tinyva/detectors/peak_tree.hpp"

namespace tinyva::detectors {

enum class ModelKind : std::uint8_t { PeakTree = 0, CnnF32 = 1, CnnInt8 = 2 };

std::string_view to_string(ModelKind kind) noexcept;

/// Valid 1-D convolution; weights laid out [out_channel][in_channel][tap].
struct ConvLayer {
  std::size_t in_channels{1};
  std::size_t out_channels{0};
  std::size_t kernel{0};
  std::size_t stride{1};
  std::vector<float> weights;
  std::vector<float> bias;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Fully connected layer; weights laid out [output][input].
struct DenseLayer {
  std::size_t inputs{0};
  std::size_t outputs{0};
  std::vector<float> weights;
  std::vector<float> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Conv1D -> ReLU -> flatten (channel-major) -> [Dense -> ReLU]* -> Dense.
struct FloatCnn {
  std::size_t input_length{0};
  ConvLayer conv;
  std::vector<DenseLayer> dense;

  bool empty() const noexcept { return conv.weights.empty() && dense.empty(); }
  std::size_t conv_positions() const noexcept;
  std::size_t parameter_count() const noexcept;
  /// Throws ModelError if shapes are inconsistent.
  void validate() const;

  friend bool operator==(const FloatCnn&, const FloatCnn&) = default;
};

/// Affine quantization: real = scale * (q - zero_point).
struct QuantParams {
  float scale{1.0f};
  std::int32_t zero_point{0};

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

struct QuantConvLayer {
  std::size_t in_channels{1};
  std::size_t out_channels{0};
  std::size_t kernel{0};
  std::size_t stride{1};
  std::vector<std::int8_t> weights;
  QuantParams weight_q;
  std::vector<std::int32_t> bias;  // scale = input scale * weight scale

  friend bool operator==(const QuantConvLayer&, const QuantConvLayer&) = default;
};

struct QuantDenseLayer {
  std::size_t inputs{0};
  std::size_t outputs{0};
  std::vector<std::int8_t> weights;
  QuantParams weight_q;
  std::vector<std::int32_t> bias;

  friend bool operator==(const QuantDenseLayer&, const QuantDenseLayer&) = default;
};

/// Int8 weights with symmetric per-tensor scales; activations are unsigned
/// 8-bit with asymmetric per-tensor ranges.
struct QuantizedCnn {
  std::size_t input_length{0};
  QuantParams input_q;
  QuantConvLayer conv;
  QuantParams conv_out_q;
  std::vector<QuantDenseLayer> dense;
  std::vector<QuantParams> hidden_out_q;  // one per dense layer except the last

  std::size_t conv_positions() const noexcept;
  void validate() const;

  friend bool operator==(const QuantizedCnn&, const QuantizedCnn&) = default;
};

// Model file layout (all little-endian):
//   "TVAM" | version u8 | kind u8 | payload
//   PeakTree payload: factor f32 | threshold u32
//   CNN payload: tensor count u8, then per tensor (absent for the empty sentinel)
//     rank u8 | dims u32 * rank | dtype u8 | raw data | (i8 only) scale f32, zero_point i32
//
// CNN tensor order: meta i32[2] = {conv stride, input length}, conv weight,
// conv bias, then (weight, bias) per dense layer. Int8 models append the
// activation quantizers (input, conv output, hidden outputs) as empty i8
// tensors that carry only scale and zero point.

inline constexpr std::uint8_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 6;  // magic + version + kind

enum class TensorType : std::uint8_t { F32 = 0, I8 = 1, I32 = 2 };

/// Multiply-accumulates per peak-tree inference beyond the two full passes:
/// one for the mean division and one for factor * std.
inline constexpr std::uint64_t kPeakTreeMacConstant = 2;

class ModelArtifact {
 public:
  using Payload = std::variant<PeakTreeParams, FloatCnn, QuantizedCnn>;

  ModelArtifact() = default;
  explicit ModelArtifact(PeakTreeParams p) : payload_(p) {}
  explicit ModelArtifact(FloatCnn m) : payload_(std::move(m)) {}
  explicit ModelArtifact(QuantizedCnn m) : payload_(std::move(m)) {}

  /// CNN artifact with no tensors; serializes to the 6-byte header alone.
  static ModelArtifact empty_sentinel() { return ModelArtifact(FloatCnn{}); }

  ModelKind kind() const noexcept;
  const Payload& payload() const noexcept { return payload_; }

  const PeakTreeParams& peak_tree() const;
  const FloatCnn& float_cnn() const;
  const QuantizedCnn& quantized_cnn() const;

  Bytes serialize() const;
  /// Computed without serializing; always equal to serialize().size().
  std::size_t serialized_size_bytes() const;
  std::uint64_t mac_count() const;

  static ModelArtifact deserialize(std::span<const std::uint8_t> bytes,
                                   const std::string& source = "<memory>");

  void save(const std::filesystem::path& path) const;
  static ModelArtifact load(const std::filesystem::path& path);

  friend bool operator==(const ModelArtifact&, const ModelArtifact&) = default;

 private:
  Payload payload_{PeakTreeParams{}};
};

std::uint64_t count_macs(const FloatCnn& model) noexcept;
std::uint64_t count_macs(const QuantizedCnn& model) noexcept;

/// Parameters in serialization order: conv weight, conv bias, then per dense
/// layer weight and bias.
std::vector<float> flatten_parameters(const FloatCnn& model);

}  // namespace tinyva::detectors
