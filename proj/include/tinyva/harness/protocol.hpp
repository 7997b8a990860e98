#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "tinyva/bytes.hpp"
#include "tinyva/iegm/rhythm.hpp"
#include "tinyva/iegm/segment.hpp"

namespace tinyva::harness {

// Frame: magic 0xA5 | type u8 | payload_len u16 LE | payload | CRC-32 u32 LE
// The CRC covers type, payload_len and payload.

inline constexpr std::uint8_t kFrameMagic = 0xA5;
inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kFrameTrailerBytes = 4;
inline constexpr std::size_t kMaxPayloadBytes = 0xFFFF;

enum class FrameType : std::uint8_t {
  Segment = 0x01,
  Result = 0x02,
  Done = 0x03,
  Metrics = 0x04,
  Error = 0x7F,
};

bool is_known_frame_type(std::uint8_t t) noexcept;

enum class ErrorCode : std::uint8_t {
  BadCrc = 0x01,
  BadLength = 0x02,
  UnknownType = 0x03,
  BadMagic = 0x04,
  Internal = 0x05,
};

inline constexpr std::uint32_t kNoSegmentId = 0xFFFFFFFF;

struct SegmentMsg {
  std::uint32_t id{0};
  std::array<float, iegm::kSegmentLength> samples{};

  friend bool operator==(const SegmentMsg&, const SegmentMsg&) = default;
};

struct ResultMsg {
  std::uint32_t id{0};
  iegm::MainCategory label{iegm::MainCategory::NonVA};
  std::uint32_t latency_us{0};

  friend bool operator==(const ResultMsg&, const ResultMsg&) = default;
};

struct DoneMsg {
  friend bool operator==(const DoneMsg&, const DoneMsg&) = default;
};

struct MetricsMsg {
  std::uint32_t inference_count{0};
  std::uint32_t flash_bytes{0};

  friend bool operator==(const MetricsMsg&, const MetricsMsg&) = default;
};

struct ErrorMsg {
  ErrorCode code{ErrorCode::Internal};
  std::uint32_t offending_id{kNoSegmentId};

  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Message = std::variant<SegmentMsg, ResultMsg, DoneMsg, MetricsMsg, ErrorMsg>;

FrameType frame_type(const Message& msg) noexcept;

/// Raw frame as it appears on the wire, before payload interpretation.
struct Frame {
  std::uint8_t type{0};
  Bytes payload;
};

Bytes encode_frame(std::uint8_t type, std::span<const std::uint8_t> payload);
Bytes encode(const Message& msg);

Bytes encode_payload(const Message& msg);

/// Interprets a CRC-checked frame. Returns nullopt when the payload length
/// does not match the type's layout or the label byte is out of range.
std::optional<Message> decode_payload(const Frame& frame);

enum class DecodeStatus { Ok, NeedMore, BadMagic, BadCrc };

struct DecodeResult {
  DecodeStatus status{DecodeStatus::NeedMore};
  Frame frame;
  std::size_t consumed{0};  // bytes to drop from the buffer front
};

/// Decodes one frame from the front of `buffer`. On BadCrc, `frame` holds the
/// (untrusted) type and payload and `consumed` spans the whole frame. On
/// BadMagic, `consumed` skips to the next candidate magic byte.
DecodeResult decode_frame(std::span<const std::uint8_t> buffer);

/// Message-level round trip helper.
std::optional<Message> decode(std::span<const std::uint8_t> bytes);

}  // namespace tinyva::harness
