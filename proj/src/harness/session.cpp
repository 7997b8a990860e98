#include "tinyva/harness/session.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "tinyva/errors.hpp"

namespace tinyva::harness {
namespace {

using Clock = std::chrono::steady_clock;

/// Buffers stream bytes and yields decoded frames one at a time.
class FrameReader {
 public:
  explicit FrameReader(Transport& t) : transport_(t) {}

  /// Next decode event; nullopt at end of stream.
  std::optional<DecodeResult> next(std::chrono::milliseconds timeout) {
    for (;;) {
      auto r = decode_frame(buffer_);
      if (r.status != DecodeStatus::NeedMore) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        return r;
      }
      std::uint8_t chunk[4096];
      const std::size_t n = transport_.read_some(chunk, timeout);
      if (n == 0) return std::nullopt;
      buffer_.insert(buffer_.end(), chunk, chunk + n);
    }
  }

 private:
  Transport& transport_;
  Bytes buffer_;
};

std::uint32_t payload_id(const Frame& f) {
  if (f.type == static_cast<std::uint8_t>(FrameType::Segment) && f.payload.size() >= 4) {
    return get_le<std::uint32_t>(f.payload, 0);
  }
  return kNoSegmentId;
}

scoring::ScoreReport score(const std::string& name, std::uint64_t seed,
                           std::span<const iegm::IegmSegment> segments,
                           std::span<const SegmentRecord> records, std::uint32_t flash_bytes,
                           const DeviceProfile& profile) {
  std::vector<scoring::SubOutcome> outcomes;
  outcomes.reserve(segments.size());
  double latency_us_sum = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    outcomes.push_back({segments[i].label, records[i].predicted});
    latency_us_sum += records[i].latency_us;
  }
  const double avg_ms = latency_us_sum / static_cast<double>(segments.size()) / 1000.0;
  auto report = scoring::make_report(name, outcomes, avg_ms, flash_bytes / 1024.0,
                                     profile.active_power_mw);
  report.seed = seed;
  return report;
}

std::uint32_t flash_bytes_u32(const Detector& detector, const DeviceProfile& profile) {
  const auto bytes = flash_footprint_bytes(detector.model_bytes(), profile);
  if (bytes > 0xFFFFFFFFull) throw ConfigError("model does not fit a 32-bit flash size");
  return static_cast<std::uint32_t>(bytes);
}

}  // namespace

DeviceStats device_serve(Transport& transport, const Detector& detector,
                         const DeviceProfile& profile, const DeviceOptions& options) {
  profile.validate();
  const std::uint32_t latency_us = modeled_latency_us(detector.mac_count(), profile);
  const std::uint32_t flash_bytes = flash_bytes_u32(detector, profile);

  DeviceStats stats;
  FrameReader reader(transport);
  bool in_garbage = false;
  auto send_error = [&](ErrorCode code, std::uint32_t id) {
    transport.write(encode(ErrorMsg{code, id}));
    ++stats.error_frames;
  };

  for (;;) {
    const auto r = reader.next(options.idle_timeout);
    if (!r) throw TransportError("stream ended before DONE");
    if (r->status == DecodeStatus::BadMagic) {
      if (!in_garbage) send_error(ErrorCode::BadMagic, kNoSegmentId);
      in_garbage = true;
      continue;
    }
    in_garbage = false;
    if (r->status == DecodeStatus::BadCrc) {
      send_error(ErrorCode::BadCrc, payload_id(r->frame));
      continue;
    }
    if (!is_known_frame_type(r->frame.type)) {
      send_error(ErrorCode::UnknownType, kNoSegmentId);
      continue;
    }
    const auto msg = decode_payload(r->frame);
    if (!msg) {
      send_error(ErrorCode::BadLength, payload_id(r->frame));
      continue;
    }
    if (const auto* seg = std::get_if<SegmentMsg>(&*msg)) {
      const auto t0 = Clock::now();
      const auto label = detector.infer(seg->samples);
      stats.inference_wall_time += Clock::now() - t0;
      ++stats.inferences;
      transport.write(encode(ResultMsg{seg->id, label, latency_us}));
    } else if (std::holds_alternative<DoneMsg>(*msg)) {
      transport.write(encode(MetricsMsg{stats.inferences, flash_bytes}));
      return stats;
    } else {
      send_error(ErrorCode::UnknownType, kNoSegmentId);
    }
  }
}

EvalSession host_evaluate(Transport& transport, std::span<const iegm::IegmSegment> segments,
                          const DeviceProfile& profile, const HostOptions& options) {
  if (segments.empty()) throw EvaluationError("no segments to evaluate");
  if (segments.size() >= kNoSegmentId) throw EvaluationError("too many segments");
  const auto started = Clock::now();

  EvalSession session;
  session.records.reserve(segments.size());
  FrameReader reader(transport);

  auto next_message = [&](const std::string& waiting_for) -> Message {
    std::optional<DecodeResult> r;
    try {
      r = reader.next(options.frame_timeout);
    } catch (const TransportError& e) {
      throw EvaluationError("timed out waiting for " + waiting_for + ": " + e.what());
    }
    if (!r) throw EvaluationError("device closed the stream while waiting for " + waiting_for);
    if (r->status != DecodeStatus::Ok) {
      throw ProtocolError("malformed frame from device while waiting for " + waiting_for);
    }
    auto msg = decode_payload(r->frame);
    if (!msg) throw ProtocolError("undecodable frame from device while waiting for " + waiting_for);
    return *msg;
  };

  SegmentMsg out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    const std::string what = "result of segment " + std::to_string(id) + " (" +
                             segments[i].patient_id + " #" + std::to_string(segments[i].index) + ")";
    if (segments[i].samples.size() != out.samples.size()) {
      throw EvaluationError("segment " + std::to_string(id) + " has the wrong length");
    }
    out.id = id;
    std::copy(segments[i].samples.begin(), segments[i].samples.end(), out.samples.begin());
    Bytes frame = encode(out);
    if (options.corrupt_once.count(id) != 0) frame.back() ^= 0xFF;

    for (int attempt = 0;; ++attempt) {
      transport.write(frame);
      const Message reply = next_message(what);
      if (const auto* res = std::get_if<ResultMsg>(&reply)) {
        if (res->id != id) {
          throw ProtocolError("expected result for segment " + std::to_string(id) + ", got " +
                              std::to_string(res->id));
        }
        session.records.push_back({id, res->label, res->latency_us});
        break;
      }
      if (const auto* err = std::get_if<ErrorMsg>(&reply)) {
        ++session.error_frames;
        if (err->offending_id != id && err->offending_id != kNoSegmentId) {
          throw ProtocolError("device reported an error for segment " +
                              std::to_string(err->offending_id) + " while " + std::to_string(id) +
                              " was in flight");
        }
        if (attempt >= options.max_retries) {
          throw EvaluationError("segment " + std::to_string(id) + " rejected after " +
                                std::to_string(attempt + 1) + " attempts");
        }
        ++session.retransmissions;
        frame = encode(out);
        continue;
      }
      throw ProtocolError("unexpected frame while waiting for " + what);
    }
  }

  transport.write(encode(DoneMsg{}));
  const Message reply = next_message("METRICS");
  const auto* metrics = std::get_if<MetricsMsg>(&reply);
  if (!metrics) throw ProtocolError("expected METRICS after DONE");
  if (metrics->inference_count != segments.size()) {
    throw ProtocolError("device reports " + std::to_string(metrics->inference_count) +
                        " inferences for " + std::to_string(segments.size()) + " segments");
  }
  session.metrics = *metrics;
  transport.close();
  session.round_trip_wall_time = Clock::now() - started;
  session.report = score(options.model_name, options.seed, segments, session.records,
                         metrics->flash_bytes, profile);
  return session;
}

EvalSession evaluate_over_pipe(const Detector& detector, std::span<const iegm::IegmSegment> segments,
                               const DeviceProfile& profile, const HostOptions& options) {
  auto [host_end, device_end] = make_pipe();
  std::exception_ptr device_error;
  std::thread device([&, dev = device_end.get()] {
    try {
      device_serve(*dev, detector, profile);
    } catch (...) {
      device_error = std::current_exception();
    }
  });
  EvalSession session;
  try {
    session = host_evaluate(*host_end, segments, profile, options);
  } catch (...) {
    host_end->close();
    device.join();
    throw;
  }
  device.join();
  if (device_error) std::rethrow_exception(device_error);
  return session;
}

scoring::ScoreReport evaluate_direct(const Detector& detector,
                                     std::span<const iegm::IegmSegment> segments,
                                     const DeviceProfile& profile, const std::string& model_name,
                                     std::uint64_t seed) {
  if (segments.empty()) throw EvaluationError("no segments to evaluate");
  profile.validate();
  const std::uint32_t latency_us = modeled_latency_us(detector.mac_count(), profile);
  std::vector<SegmentRecord> records;
  records.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    records.push_back({static_cast<std::uint32_t>(i), detector.infer(segments[i].samples),
                       latency_us});
  }
  return score(model_name, seed, segments, records, flash_bytes_u32(detector, profile), profile);
}

}  // namespace tinyva::harness
