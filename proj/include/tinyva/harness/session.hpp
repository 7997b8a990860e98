#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tinyva/harness/cost_model.hpp"
#include "tinyva/harness/detector.hpp"
#include "tinyva/harness/protocol.hpp"
#include "tinyva/harness/transport.hpp"
#include "tinyva/scoring/report.hpp"

namespace tinyva::harness {

struct DeviceStats {
  std::uint32_t inferences{0};
  std::uint32_t error_frames{0};
  /// Measured time inside Detector::infer; informational, never scored.
  std::chrono::nanoseconds inference_wall_time{0};
};

struct DeviceOptions {
  /// How long the device waits for the next byte before giving up.
  std::chrono::milliseconds idle_timeout{std::chrono::minutes(10)};
};

/// Serves inferences until a DONE frame arrives. Malformed frames are answered
/// with ERROR and the session continues. Throws TransportError if the stream
/// ends before DONE.
DeviceStats device_serve(Transport& transport, const Detector& detector,
                         const DeviceProfile& profile, const DeviceOptions& options = {});

struct HostOptions {
  std::string model_name{"model"};
  std::uint64_t seed{0};
  std::chrono::milliseconds frame_timeout{5000};
  int max_retries{3};
  /// Segment ids whose first transmission gets a corrupted CRC (fault injection).
  std::set<std::uint32_t> corrupt_once;
};

struct SegmentRecord {
  std::uint32_t id{0};
  iegm::MainCategory predicted{iegm::MainCategory::NonVA};
  std::uint32_t latency_us{0};
};

struct EvalSession {
  std::vector<SegmentRecord> records;
  MetricsMsg metrics;
  std::uint32_t error_frames{0};
  std::uint32_t retransmissions{0};
  std::chrono::nanoseconds round_trip_wall_time{0};
  scoring::ScoreReport report;
};

/// Streams every segment (id = position), collects RESULT frames, closes the
/// session with DONE/METRICS and scores it. Throws EvaluationError on a frame
/// timeout and ProtocolError on id mismatches or unexpected frames.
EvalSession host_evaluate(Transport& transport, std::span<const iegm::IegmSegment> segments,
                          const DeviceProfile& profile, const HostOptions& options = {});

/// Runs device_serve on a worker thread over an in-memory pipe and evaluates.
EvalSession evaluate_over_pipe(const Detector& detector, std::span<const iegm::IegmSegment> segments,
                               const DeviceProfile& profile, const HostOptions& options = {});

/// Same scoring as the harness, computed in-process without the protocol.
scoring::ScoreReport evaluate_direct(const Detector& detector,
                                     std::span<const iegm::IegmSegment> segments,
                                     const DeviceProfile& profile, const std::string& model_name,
                                     std::uint64_t seed = 0);

}  // namespace tinyva::harness
