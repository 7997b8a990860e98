#include "tinyva/harness/protocol.hpp"

#include <algorithm>

namespace tinyva::harness {

bool is_known_frame_type(std::uint8_t t) noexcept {
  switch (static_cast<FrameType>(t)) {
    case FrameType::Segment:
    case FrameType::Result:
    case FrameType::Done:
    case FrameType::Metrics:
    case FrameType::Error:
      return true;
  }
  return false;
}

FrameType frame_type(const Message& msg) noexcept {
  constexpr FrameType types[] = {FrameType::Segment, FrameType::Result, FrameType::Done,
                                 FrameType::Metrics, FrameType::Error};
  return types[msg.index()];
}

Bytes encode_frame(std::uint8_t type, std::span<const std::uint8_t> payload) {
  Bytes out;
  out.reserve(kFrameHeaderBytes + payload.size() + kFrameTrailerBytes);
  put_u8(out, kFrameMagic);
  put_u8(out, type);
  put_le(out, static_cast<std::uint16_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  put_le(out, crc32(std::span(out).subspan(1)));
  return out;
}

Bytes encode_payload(const Message& msg) {
  Bytes p;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SegmentMsg>) {
          p.reserve(4 + 4 * m.samples.size());
          put_le(p, m.id);
          for (float x : m.samples) put_le(p, x);
        } else if constexpr (std::is_same_v<T, ResultMsg>) {
          put_le(p, m.id);
          put_u8(p, static_cast<std::uint8_t>(m.label));
          put_le(p, m.latency_us);
        } else if constexpr (std::is_same_v<T, MetricsMsg>) {
          put_le(p, m.inference_count);
          put_le(p, m.flash_bytes);
        } else if constexpr (std::is_same_v<T, ErrorMsg>) {
          put_u8(p, static_cast<std::uint8_t>(m.code));
          put_le(p, m.offending_id);
        }
      },
      msg);
  return p;
}

Bytes encode(const Message& msg) {
  return encode_frame(static_cast<std::uint8_t>(frame_type(msg)), encode_payload(msg));
}

std::optional<Message> decode_payload(const Frame& frame) {
  const std::span<const std::uint8_t> p = frame.payload;
  switch (static_cast<FrameType>(frame.type)) {
    case FrameType::Segment: {
      if (p.size() != 4 + 4 * iegm::kSegmentLength) return std::nullopt;
      SegmentMsg m;
      m.id = get_le<std::uint32_t>(p, 0);
      for (std::size_t i = 0; i < m.samples.size(); ++i) m.samples[i] = get_le<float>(p, 4 + 4 * i);
      return m;
    }
    case FrameType::Result: {
      if (p.size() != 9 || p[4] > 1) return std::nullopt;
      return ResultMsg{get_le<std::uint32_t>(p, 0), static_cast<iegm::MainCategory>(p[4]),
                       get_le<std::uint32_t>(p, 5)};
    }
    case FrameType::Done:
      if (!p.empty()) return std::nullopt;
      return DoneMsg{};
    case FrameType::Metrics:
      if (p.size() != 8) return std::nullopt;
      return MetricsMsg{get_le<std::uint32_t>(p, 0), get_le<std::uint32_t>(p, 4)};
    case FrameType::Error:
      if (p.size() != 5) return std::nullopt;
      return ErrorMsg{static_cast<ErrorCode>(p[0]), get_le<std::uint32_t>(p, 1)};
  }
  return std::nullopt;
}

DecodeResult decode_frame(std::span<const std::uint8_t> buffer) {
  DecodeResult r;
  if (buffer.empty()) return r;
  if (buffer[0] != kFrameMagic) {
    const auto next = std::find(buffer.begin() + 1, buffer.end(), kFrameMagic);
    r.status = DecodeStatus::BadMagic;
    r.consumed = static_cast<std::size_t>(next - buffer.begin());
    return r;
  }
  if (buffer.size() < kFrameHeaderBytes) return r;
  const auto len = get_le<std::uint16_t>(buffer, 2);
  const std::size_t total = kFrameHeaderBytes + len + kFrameTrailerBytes;
  if (buffer.size() < total) return r;

  r.frame.type = buffer[1];
  r.frame.payload.assign(buffer.begin() + kFrameHeaderBytes,
                         buffer.begin() + static_cast<std::ptrdiff_t>(kFrameHeaderBytes + len));
  r.consumed = total;
  const auto stored = get_le<std::uint32_t>(buffer, kFrameHeaderBytes + len);
  const auto computed = crc32(buffer.subspan(1, kFrameHeaderBytes - 1 + len));
  r.status = stored == computed ? DecodeStatus::Ok : DecodeStatus::BadCrc;
  return r;
}

std::optional<Message> decode(std::span<const std::uint8_t> bytes) {
  const auto r = decode_frame(bytes);
  if (r.status != DecodeStatus::Ok || r.consumed != bytes.size()) return std::nullopt;
  return decode_payload(r.frame);
}

}  // namespace tinyva::harness
