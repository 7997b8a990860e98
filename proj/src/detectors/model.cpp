#include "tinyva/detectors/model.hpp"

#include <array>
#include <fstream>
#include <iterator>
#include <string>

#include "tinyva/errors.hpp"

namespace tinyva::detectors {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'T', 'V', 'A', 'M'};

std::size_t tensor_bytes(std::size_t rank, std::size_t elements, TensorType type) {
  std::size_t n = 1 + 4 * rank + 1;
  switch (type) {
    case TensorType::F32:
    case TensorType::I32:
      return n + 4 * elements;
    case TensorType::I8:
      return n + elements + 8;
  }
  return n;
}

template <typename T>
void put_tensor(Bytes& out, std::initializer_list<std::size_t> dims, TensorType type,
                const std::vector<T>& data, const QuantParams* q = nullptr) {
  put_u8(out, static_cast<std::uint8_t>(dims.size()));
  for (std::size_t d : dims) put_le(out, static_cast<std::uint32_t>(d));
  put_u8(out, static_cast<std::uint8_t>(type));
  for (const T& v : data) put_le(out, v);
  if (type == TensorType::I8) {
    put_le(out, q->scale);
    put_le(out, q->zero_point);
  }
}

struct Tensor {
  std::vector<std::size_t> dims;
  TensorType type{TensorType::F32};
  std::vector<float> f32;
  std::vector<std::int8_t> i8;
  std::vector<std::int32_t> i32;
  QuantParams q;
  std::size_t offset{0};

  std::size_t elements() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
    throw LoadError(source_ + " at offset " + std::to_string(offset) + ": " + what);
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated model file", pos_);
  }

  template <typename T>
  T read() {
    need(sizeof(T));
    T v = get_le<T>(bytes_, pos_);
    pos_ += sizeof(T);
    return v;
  }

  Tensor tensor() {
    Tensor t;
    t.offset = pos_;
    const auto rank = read<std::uint8_t>();
    if (rank == 0 || rank > 4) fail("tensor rank must be 1..4", t.offset);
    for (int i = 0; i < rank; ++i) t.dims.push_back(read<std::uint32_t>());
    const std::size_t type_offset = pos_;
    const auto type = read<std::uint8_t>();
    if (type > 2) fail("unknown tensor dtype " + std::to_string(type), type_offset);
    t.type = static_cast<TensorType>(type);
    std::size_t n = 1;
    for (auto d : t.dims) {
      if (d != 0 && n > bytes_.size() / d) fail("tensor larger than the file", t.offset);
      n *= d;
    }
    switch (t.type) {
      case TensorType::F32:
        need(4 * n);
        t.f32.resize(n);
        for (auto& v : t.f32) v = read<float>();
        break;
      case TensorType::I32:
        need(4 * n);
        t.i32.resize(n);
        for (auto& v : t.i32) v = read<std::int32_t>();
        break;
      case TensorType::I8:
        need(n + 8);
        t.i8.resize(n);
        for (auto& v : t.i8) v = read<std::int8_t>();
        t.q.scale = read<float>();
        t.q.zero_point = read<std::int32_t>();
        break;
    }
    return t;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string source_;
  std::size_t pos_{0};
};

void expect(const Reader& r, const Tensor& t, TensorType type, std::size_t rank, const char* what) {
  if (t.type != type || t.dims.size() != rank) {
    r.fail(std::string("unexpected dtype or rank for ") + what, t.offset);
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::PeakTree:
      return "peak_tree";
    case ModelKind::CnnF32:
      return "cnn_f32";
    case ModelKind::CnnInt8:
      return "cnn_int8";
  }
  return "unknown";
}

std::size_t FloatCnn::conv_positions() const noexcept {
  if (conv.kernel == 0 || conv.stride == 0 || input_length < conv.kernel) return 0;
  return (input_length - conv.kernel) / conv.stride + 1;
}

std::size_t FloatCnn::parameter_count() const noexcept {
  std::size_t n = conv.weights.size() + conv.bias.size();
  for (const auto& d : dense) n += d.weights.size() + d.bias.size();
  return n;
}

void FloatCnn::validate() const {
  if (conv.kernel == 0 || conv.stride == 0 || conv.out_channels == 0 || conv.in_channels != 1) {
    throw ModelError("conv layer needs kernel, stride and channels >= 1 and a single input channel");
  }
  if (conv_positions() == 0) throw ModelError("conv kernel longer than the input");
  if (conv.weights.size() != conv.out_channels * conv.in_channels * conv.kernel ||
      conv.bias.size() != conv.out_channels) {
    throw ModelError("conv parameter count does not match its shape");
  }
  if (dense.empty()) throw ModelError("model needs at least one dense layer");
  std::size_t width = conv.out_channels * conv_positions();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto& d = dense[i];
    if (d.inputs != width || d.outputs == 0 || d.weights.size() != d.inputs * d.outputs ||
        d.bias.size() != d.outputs) {
      throw ModelError("dense layer " + std::to_string(i) + " shape mismatch");
    }
    width = d.outputs;
  }
  if (width != 2) throw ModelError("output layer must have 2 units");
}

std::size_t QuantizedCnn::conv_positions() const noexcept {
  if (conv.kernel == 0 || conv.stride == 0 || input_length < conv.kernel) return 0;
  return (input_length - conv.kernel) / conv.stride + 1;
}

void QuantizedCnn::validate() const {
  if (conv.kernel == 0 || conv.stride == 0 || conv.out_channels == 0 || conv.in_channels != 1 ||
      conv_positions() == 0) {
    throw ModelError("quantized conv layer has an invalid shape");
  }
  if (conv.weights.size() != conv.out_channels * conv.kernel || conv.bias.size() != conv.out_channels) {
    throw ModelError("quantized conv parameter count does not match its shape");
  }
  if (dense.empty() || hidden_out_q.size() + 1 != dense.size()) {
    throw ModelError("quantized model needs one activation quantizer per hidden layer");
  }
  std::size_t width = conv.out_channels * conv_positions();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto& d = dense[i];
    if (d.inputs != width || d.outputs == 0 || d.weights.size() != d.inputs * d.outputs ||
        d.bias.size() != d.outputs) {
      throw ModelError("quantized dense layer " + std::to_string(i) + " shape mismatch");
    }
    width = d.outputs;
  }
  if (width != 2) throw ModelError("output layer must have 2 units");
}

std::uint64_t count_macs(const FloatCnn& m) noexcept {
  if (m.empty()) return 0;
  std::uint64_t macs = static_cast<std::uint64_t>(m.conv_positions()) * m.conv.out_channels *
                       m.conv.kernel * m.conv.in_channels;
  for (const auto& d : m.dense) macs += static_cast<std::uint64_t>(d.inputs) * d.outputs;
  return macs;
}

std::uint64_t count_macs(const QuantizedCnn& m) noexcept {
  std::uint64_t macs = static_cast<std::uint64_t>(m.conv_positions()) * m.conv.out_channels *
                       m.conv.kernel * m.conv.in_channels;
  for (const auto& d : m.dense) macs += static_cast<std::uint64_t>(d.inputs) * d.outputs;
  return macs;
}

std::vector<float> flatten_parameters(const FloatCnn& m) {
  std::vector<float> out;
  out.reserve(m.parameter_count());
  out.insert(out.end(), m.conv.weights.begin(), m.conv.weights.end());
  out.insert(out.end(), m.conv.bias.begin(), m.conv.bias.end());
  for (const auto& d : m.dense) {
    out.insert(out.end(), d.weights.begin(), d.weights.end());
    out.insert(out.end(), d.bias.begin(), d.bias.end());
  }
  return out;
}

ModelKind ModelArtifact::kind() const noexcept {
  return static_cast<ModelKind>(payload_.index());
}

const PeakTreeParams& ModelArtifact::peak_tree() const {
  if (const auto* p = std::get_if<PeakTreeParams>(&payload_)) return *p;
  throw ModelError("model is not a peak tree");
}

const FloatCnn& ModelArtifact::float_cnn() const {
  if (const auto* p = std::get_if<FloatCnn>(&payload_)) return *p;
  throw ModelError("model is not a float CNN");
}

const QuantizedCnn& ModelArtifact::quantized_cnn() const {
  if (const auto* p = std::get_if<QuantizedCnn>(&payload_)) return *p;
  throw ModelError("model is not an int8 CNN");
}

std::uint64_t ModelArtifact::mac_count() const {
  switch (kind()) {
    case ModelKind::PeakTree:
      return 2 * iegm::kSegmentLength + kPeakTreeMacConstant;
    case ModelKind::CnnF32:
      return count_macs(float_cnn());
    case ModelKind::CnnInt8:
      return count_macs(quantized_cnn());
  }
  return 0;
}

std::size_t ModelArtifact::serialized_size_bytes() const {
  std::size_t n = kModelHeaderBytes;
  switch (kind()) {
    case ModelKind::PeakTree:
      return n + 8;
    case ModelKind::CnnF32: {
      const auto& m = float_cnn();
      if (m.empty()) return n;
      n += 1;
      n += tensor_bytes(1, 2, TensorType::I32);
      n += tensor_bytes(3, m.conv.weights.size(), TensorType::F32);
      n += tensor_bytes(1, m.conv.bias.size(), TensorType::F32);
      for (const auto& d : m.dense) {
        n += tensor_bytes(2, d.weights.size(), TensorType::F32);
        n += tensor_bytes(1, d.bias.size(), TensorType::F32);
      }
      return n;
    }
    case ModelKind::CnnInt8: {
      const auto& m = quantized_cnn();
      n += 1;
      n += tensor_bytes(1, 2, TensorType::I32);
      n += tensor_bytes(3, m.conv.weights.size(), TensorType::I8);
      n += tensor_bytes(1, m.conv.bias.size(), TensorType::I32);
      for (const auto& d : m.dense) {
        n += tensor_bytes(2, d.weights.size(), TensorType::I8);
        n += tensor_bytes(1, d.bias.size(), TensorType::I32);
      }
      n += (2 + m.hidden_out_q.size()) * tensor_bytes(1, 0, TensorType::I8);
      return n;
    }
  }
  return n;
}

Bytes ModelArtifact::serialize() const {
  Bytes out(kMagic.begin(), kMagic.end());
  put_u8(out, kModelFormatVersion);
  put_u8(out, static_cast<std::uint8_t>(kind()));
  switch (kind()) {
    case ModelKind::PeakTree: {
      const auto& p = peak_tree();
      put_le(out, p.factor);
      put_le(out, p.peak_threshold);
      break;
    }
    case ModelKind::CnnF32: {
      const auto& m = float_cnn();
      if (m.empty()) break;
      m.validate();
      put_u8(out, static_cast<std::uint8_t>(3 + 2 * m.dense.size()));
      const std::vector<std::int32_t> meta = {static_cast<std::int32_t>(m.conv.stride),
                                              static_cast<std::int32_t>(m.input_length)};
      put_tensor(out, {2}, TensorType::I32, meta);
      put_tensor(out, {m.conv.out_channels, m.conv.in_channels, m.conv.kernel}, TensorType::F32,
                 m.conv.weights);
      put_tensor(out, {m.conv.out_channels}, TensorType::F32, m.conv.bias);
      for (const auto& d : m.dense) {
        put_tensor(out, {d.outputs, d.inputs}, TensorType::F32, d.weights);
        put_tensor(out, {d.outputs}, TensorType::F32, d.bias);
      }
      break;
    }
    case ModelKind::CnnInt8: {
      const auto& m = quantized_cnn();
      m.validate();
      put_u8(out, static_cast<std::uint8_t>(4 + 3 * m.dense.size()));
      const std::vector<std::int32_t> meta = {static_cast<std::int32_t>(m.conv.stride),
                                              static_cast<std::int32_t>(m.input_length)};
      put_tensor(out, {2}, TensorType::I32, meta);
      put_tensor(out, {m.conv.out_channels, m.conv.in_channels, m.conv.kernel}, TensorType::I8,
                 m.conv.weights, &m.conv.weight_q);
      put_tensor(out, {m.conv.out_channels}, TensorType::I32, m.conv.bias);
      for (const auto& d : m.dense) {
        put_tensor(out, {d.outputs, d.inputs}, TensorType::I8, d.weights, &d.weight_q);
        put_tensor(out, {d.outputs}, TensorType::I32, d.bias);
      }
      const std::vector<std::int8_t> none;
      put_tensor(out, {0}, TensorType::I8, none, &m.input_q);
      put_tensor(out, {0}, TensorType::I8, none, &m.conv_out_q);
      for (const auto& q : m.hidden_out_q) put_tensor(out, {0}, TensorType::I8, none, &q);
      break;
    }
  }
  return out;
}

ModelArtifact ModelArtifact::deserialize(std::span<const std::uint8_t> bytes,
                                         const std::string& source) {
  Reader r(bytes, source);
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (r.read<std::uint8_t>() != kMagic[i]) r.fail("bad magic, expected TVAM", 0);
  }
  const auto version = r.read<std::uint8_t>();
  if (version != kModelFormatVersion) r.fail("unsupported format version " + std::to_string(version), 4);
  const auto kind = r.read<std::uint8_t>();
  if (kind > 2) r.fail("unknown model kind " + std::to_string(kind), 5);

  ModelArtifact model;
  if (kind == static_cast<std::uint8_t>(ModelKind::PeakTree)) {
    PeakTreeParams p;
    p.factor = r.read<float>();
    p.peak_threshold = r.read<std::uint32_t>();
    if (!(p.factor > 0.0f)) r.fail("peak factor must be positive", 6);
    model = ModelArtifact(p);
  } else if (kind == static_cast<std::uint8_t>(ModelKind::CnnF32) && r.pos() == bytes.size()) {
    model = ModelArtifact::empty_sentinel();
  } else {
    const std::size_t count_offset = r.pos();
    const auto count = r.read<std::uint8_t>();
    const bool quantized = kind == static_cast<std::uint8_t>(ModelKind::CnnInt8);
    const std::size_t base = quantized ? 4 : 3;
    const std::size_t per_layer = quantized ? 3 : 2;
    if (count < base + per_layer || (count - base) % per_layer != 0) {
      r.fail("tensor count " + std::to_string(count) + " does not describe a CNN", count_offset);
    }
    const std::size_t layers = (count - base) / per_layer;
    std::vector<Tensor> tensors;
    for (std::size_t i = 0; i < count; ++i) tensors.push_back(r.tensor());

    const auto& meta = tensors[0];
    expect(r, meta, TensorType::I32, 1, "meta tensor");
    if (meta.i32.size() != 2 || meta.i32[0] <= 0 || meta.i32[1] <= 0) {
      r.fail("meta tensor must hold positive {stride, input_length}", meta.offset);
    }
    const auto& cw = tensors[1];
    const auto& cb = tensors[2];
    const TensorType wtype = quantized ? TensorType::I8 : TensorType::F32;
    const TensorType btype = quantized ? TensorType::I32 : TensorType::F32;
    expect(r, cw, wtype, 3, "conv weight");
    expect(r, cb, btype, 1, "conv bias");
    if (quantized) {
      QuantizedCnn m;
      m.input_length = static_cast<std::size_t>(meta.i32[1]);
      m.conv = {cw.dims[1], cw.dims[0], cw.dims[2], static_cast<std::size_t>(meta.i32[0]),
                cw.i8, cw.q, cb.i32};
      for (std::size_t l = 0; l < layers; ++l) {
        const auto& w = tensors[3 + 2 * l];
        const auto& b = tensors[4 + 2 * l];
        expect(r, w, TensorType::I8, 2, "dense weight");
        expect(r, b, TensorType::I32, 1, "dense bias");
        m.dense.push_back({w.dims[1], w.dims[0], w.i8, w.q, b.i32});
      }
      const std::size_t act = 3 + 2 * layers;
      for (std::size_t i = act; i < count; ++i) {
        expect(r, tensors[i], TensorType::I8, 1, "activation quantizer");
        if (tensors[i].elements() != 0) r.fail("activation quantizer must be empty", tensors[i].offset);
      }
      m.input_q = tensors[act].q;
      m.conv_out_q = tensors[act + 1].q;
      for (std::size_t i = act + 2; i < count; ++i) m.hidden_out_q.push_back(tensors[i].q);
      try {
        m.validate();
      } catch (const ModelError& e) {
        r.fail(e.what(), count_offset);
      }
      model = ModelArtifact(std::move(m));
    } else {
      FloatCnn m;
      m.input_length = static_cast<std::size_t>(meta.i32[1]);
      m.conv = {cw.dims[1], cw.dims[0], cw.dims[2], static_cast<std::size_t>(meta.i32[0]),
                cw.f32, cb.f32};
      for (std::size_t l = 0; l < layers; ++l) {
        const auto& w = tensors[3 + 2 * l];
        const auto& b = tensors[4 + 2 * l];
        expect(r, w, TensorType::F32, 2, "dense weight");
        expect(r, b, TensorType::F32, 1, "dense bias");
        m.dense.push_back({w.dims[1], w.dims[0], w.f32, b.f32});
      }
      try {
        m.validate();
      } catch (const ModelError& e) {
        r.fail(e.what(), count_offset);
      }
      model = ModelArtifact(std::move(m));
    }
  }
  if (!r.done()) r.fail("trailing bytes after model payload", r.pos());
  return model;
}

void ModelArtifact::save(const std::filesystem::path& path) const {
  const Bytes bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError(path.string() + ": write failed");
}

ModelArtifact ModelArtifact::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open model file");
  const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, path.string());
}

}  // namespace tinyva::detectors
