#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "test_support.hpp"
#include "tinyva/bytes.hpp"
#include "tinyva/errors.hpp"
#include "tinyva/harness/search.hpp"
#include "tinyva/harness/session.hpp"
#include "tinyva/iegm/dataset.hpp"

using namespace tinyva;
using namespace tinyva::harness;
using namespace std::chrono_literals;
using iegm::MainCategory;
using iegm::SubCategory;

namespace {

const iegm::Dataset& small_dataset() {
  static const auto ds = iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 8, 0.75, 5);
  return ds;
}

std::vector<iegm::IegmSegment> first_segments(std::size_t n) {
  const auto& all = small_dataset().test;
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(n, all.size()))};
}

SegmentMsg segment_msg(std::uint32_t id, const iegm::IegmSegment& seg) {
  SegmentMsg m;
  m.id = id;
  std::copy(seg.samples.begin(), seg.samples.end(), m.samples.begin());
  return m;
}

// Test-side client for a device running on a worker thread.
class DeviceFixture {
 public:
  explicit DeviceFixture(const Detector& detector, DeviceProfile profile = {}) {
    auto [host, device] = make_pipe();
    host_ = std::move(host);
    device_ = std::move(device);
    worker_ = std::thread([this, &detector, profile] {
      try {
        stats_ = device_serve(*device_, detector, profile, {2s});
      } catch (...) {
        error_ = std::current_exception();
      }
    });
  }
  ~DeviceFixture() {
    host_->close();
    if (worker_.joinable()) worker_.join();
  }

  void send(const Bytes& b) { host_->write(b); }

  Message receive() {
    for (;;) {
      auto r = decode_frame(buffer_);
      if (r.status == DecodeStatus::Ok) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
        auto m = decode_payload(r.frame);
        if (!m) throw ProtocolError("undecodable frame from device");
        return *m;
      }
      if (r.status != DecodeStatus::NeedMore) throw ProtocolError("bad frame from device");
      std::uint8_t chunk[512];
      const auto n = host_->read_some(chunk, 2s);
      if (n == 0) throw TransportError("device closed");
      buffer_.insert(buffer_.end(), chunk, chunk + n);
    }
  }

  DeviceStats finish() {
    worker_.join();
    if (error_) std::rethrow_exception(error_);
    return stats_;
  }

 private:
  std::unique_ptr<PipeEnd> host_, device_;
  std::thread worker_;
  DeviceStats stats_;
  std::exception_ptr error_;
  Bytes buffer_;
};

}  // namespace

// ---- cost model

TEST(CostModel, ReferenceValues) {
  const DeviceProfile p;
  EXPECT_DOUBLE_EQ(modeled_latency_ms(0, p), 0.125);
  EXPECT_DOUBLE_EQ(modeled_latency_ms(11875, p), 0.421875);
  EXPECT_EQ(modeled_latency_us(11875, p), 422u);
  EXPECT_EQ(flash_footprint_bytes(6329, p), 5120u + 6329u);
  EXPECT_NEAR(flash_footprint_kib(6329, p), 11.1806640625, 1e-12);
  EXPECT_DOUBLE_EQ(energy_uj(0.5, p), 15.0);
}

TEST(CostModel, MonotoneInMacsAndBytes) {
  const DeviceProfile p;
  double prev = -1.0;
  for (std::uint64_t macs = 0; macs < 2'000'000; macs += 9973) {
    const double l = modeled_latency_ms(macs, p);
    EXPECT_GT(l, prev);
    prev = l;
  }
  EXPECT_LT(flash_footprint_kib(100, p), flash_footprint_kib(101, p));
}

TEST(CostModel, ProfileValidation) {
  DeviceProfile p;
  EXPECT_NO_THROW(p.validate());
  p.clock_hz = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.base_program_kib = 300;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_TRUE(flash_compliant(256.0, DeviceProfile{}));
  EXPECT_FALSE(flash_compliant(256.001, DeviceProfile{}));
}

// ---- protocol

TEST(Protocol, RoundTripsEveryMessage) {
  SegmentMsg seg;
  seg.id = 77;
  for (std::size_t i = 0; i < seg.samples.size(); ++i) seg.samples[i] = static_cast<float>(i) * -0.25f;
  const std::vector<Message> msgs = {seg,
                                     ResultMsg{3, MainCategory::VA, 422},
                                     DoneMsg{},
                                     MetricsMsg{1000, 11449},
                                     ErrorMsg{ErrorCode::BadCrc, 9}};
  for (const auto& m : msgs) {
    const auto bytes = encode(m);
    const auto back = decode(bytes);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, m);
  }
  EXPECT_EQ(encode(seg).size(), 4u + 4u + 4u * iegm::kSegmentLength + 4u);
}

TEST(Protocol, FrameLayout) {
  const auto b = encode(ResultMsg{0x01020304, MainCategory::VA, 5});
  ASSERT_EQ(b.size(), 4u + 9u + 4u);
  EXPECT_EQ(b[0], kFrameMagic);
  EXPECT_EQ(b[1], static_cast<std::uint8_t>(FrameType::Result));
  EXPECT_EQ(get_le<std::uint16_t>(b, 2), 9u);
  EXPECT_EQ(get_le<std::uint32_t>(b, 4), 0x01020304u);
  const std::span<const std::uint8_t> covered(b.data() + 1, b.size() - 5);
  EXPECT_EQ(get_le<std::uint32_t>(b, b.size() - 4), crc32(covered));
}

TEST(Protocol, FuzzNeverCrashesOrAcceptsCorruption) {
  std::mt19937_64 gen(99);
  const auto base = encode(MetricsMsg{12, 34});
  int accepted_mutants = 0;
  for (int t = 0; t < 10000; ++t) {
    Bytes b = base;
    const int mode = t % 3;
    if (mode == 0) {
      b[gen() % b.size()] ^= static_cast<std::uint8_t>(1 + gen() % 255);
    } else if (mode == 1) {
      b.resize(gen() % b.size());
    } else {
      b.resize(gen() % 64);
      for (auto& v : b) v = static_cast<std::uint8_t>(gen());
    }
    const auto r = decode_frame(b);
    EXPECT_LE(r.consumed, b.size());
    if (r.status == DecodeStatus::Ok && mode == 0) ++accepted_mutants;
    if (r.status == DecodeStatus::Ok) (void)decode_payload(r.frame);
  }
  // Single-byte flips in a CRC-protected frame are always caught.
  EXPECT_EQ(accepted_mutants, 0);
}

TEST(Protocol, SkipsGarbageBeforeMagic) {
  Bytes b = {0x00, 0x11, 0x22};
  const auto frame = encode(DoneMsg{});
  b.insert(b.end(), frame.begin(), frame.end());
  auto r = decode_frame(b);
  EXPECT_EQ(r.status, DecodeStatus::BadMagic);
  EXPECT_EQ(r.consumed, 3u);
  r = decode_frame(std::span<const std::uint8_t>(b).subspan(3));
  EXPECT_EQ(r.status, DecodeStatus::Ok);
}

TEST(Protocol, WrongPayloadLengthIsRejected) {
  Frame f{static_cast<std::uint8_t>(FrameType::Result), Bytes(8, 0)};
  EXPECT_FALSE(decode_payload(f).has_value());
  f.payload = Bytes(9, 0);
  f.payload[4] = 2;  // label out of range
  EXPECT_FALSE(decode_payload(f).has_value());
}

// ---- device

TEST(Device, DoneWithoutSegments) {
  const ConstantDetector det(MainCategory::VA);
  DeviceFixture dev(det);
  dev.send(encode(DoneMsg{}));
  const auto m = dev.receive();
  ASSERT_TRUE(std::holds_alternative<MetricsMsg>(m));
  EXPECT_EQ(std::get<MetricsMsg>(m).inference_count, 0u);
  EXPECT_EQ(std::get<MetricsMsg>(m).flash_bytes, 5120u);
  EXPECT_EQ(dev.finish().inferences, 0u);
}

TEST(Device, AnswersInOrder) {
  const auto segs = first_segments(100);
  const OracleDetector det(segs);
  DeviceFixture dev(det);
  for (std::uint32_t i = 0; i < segs.size(); ++i) dev.send(encode(segment_msg(i, segs[i])));
  for (std::uint32_t i = 0; i < segs.size(); ++i) {
    const auto m = dev.receive();
    ASSERT_TRUE(std::holds_alternative<ResultMsg>(m));
    const auto& r = std::get<ResultMsg>(m);
    EXPECT_EQ(r.id, i);
    EXPECT_EQ(r.label, iegm::main_category(segs[i].label));
    EXPECT_EQ(r.latency_us, 125u);
  }
  dev.send(encode(DoneMsg{}));
  const auto m = dev.receive();
  EXPECT_EQ(std::get<MetricsMsg>(m).inference_count, segs.size());
  EXPECT_EQ(dev.finish().inferences, segs.size());
}

TEST(Device, CorruptCrcYieldsOneErrorAndSessionContinues) {
  const auto segs = first_segments(2);
  const ConstantDetector det(MainCategory::NonVA);
  DeviceFixture dev(det);
  auto bad = encode(segment_msg(0, segs[0]));
  bad.back() ^= 0xFF;
  dev.send(bad);
  auto m = dev.receive();
  ASSERT_TRUE(std::holds_alternative<ErrorMsg>(m));
  EXPECT_EQ(std::get<ErrorMsg>(m), (ErrorMsg{ErrorCode::BadCrc, 0}));
  dev.send(encode(segment_msg(1, segs[1])));
  m = dev.receive();
  ASSERT_TRUE(std::holds_alternative<ResultMsg>(m));
  EXPECT_EQ(std::get<ResultMsg>(m).id, 1u);
  dev.send(encode(DoneMsg{}));
  EXPECT_EQ(std::get<MetricsMsg>(dev.receive()).inference_count, 1u);
  const auto stats = dev.finish();
  EXPECT_EQ(stats.error_frames, 1u);
}

TEST(Device, GarbageAndUnknownTypes) {
  const ConstantDetector det(MainCategory::NonVA);
  DeviceFixture dev(det);
  dev.send(Bytes{0x01, 0x02, 0x03});
  auto m = dev.receive();
  EXPECT_EQ(std::get<ErrorMsg>(m).code, ErrorCode::BadMagic);
  dev.send(encode_frame(0x42, Bytes{}));
  m = dev.receive();
  EXPECT_EQ(std::get<ErrorMsg>(m).code, ErrorCode::UnknownType);
  dev.send(encode_frame(static_cast<std::uint8_t>(FrameType::Segment), Bytes(10, 0)));
  m = dev.receive();
  EXPECT_EQ(std::get<ErrorMsg>(m).code, ErrorCode::BadLength);
  dev.send(encode(DoneMsg{}));
  EXPECT_TRUE(std::holds_alternative<MetricsMsg>(dev.receive()));
  EXPECT_EQ(dev.finish().error_frames, 3u);
}

TEST(Device, StreamEndingBeforeDoneThrows) {
  const ConstantDetector det(MainCategory::NonVA);
  auto [host, device] = make_pipe();
  host->close();
  EXPECT_THROW(device_serve(*device, det, DeviceProfile{}), TransportError);
}

// ---- host sessions

TEST(Session, OracleScoresPerfectly) {
  const auto& segs = small_dataset().test;
  const OracleDetector det(segs);
  const auto s = evaluate_over_pipe(det, segs, DeviceProfile{}, {.model_name = "oracle"});
  EXPECT_EQ(s.report.f_beta, 1.0);
  EXPECT_EQ(s.report.segments, segs.size());
  EXPECT_EQ(s.records.size(), segs.size());
  EXPECT_DOUBLE_EQ(s.report.avg_latency_ms, 0.125);
  EXPECT_DOUBLE_EQ(s.report.flash_kib, 5.0);
  EXPECT_NEAR(s.report.final_score, 100.0 + 20.0 * (1.0 + 0.875 / 199.0) + 20.0, 1e-9);
  EXPECT_TRUE(s.report.compliant());
}

TEST(Session, AlwaysVa) {
  const auto& segs = small_dataset().test;
  const ConstantDetector det(MainCategory::VA);
  const auto s = evaluate_over_pipe(det, segs, DeviceProfile{});
  ASSERT_TRUE(s.report.sensitivity && s.report.specificity);
  EXPECT_EQ(*s.report.sensitivity, 1.0);
  EXPECT_EQ(*s.report.specificity, 0.0);
  EXPECT_EQ(s.report.recall, 1.0);
}

TEST(Session, MatchesDirectEvaluation) {
  const auto& ds = small_dataset();
  detectors::PeakTreeParams p;
  p.factor = 1.5f;
  p.peak_threshold = 13;
  const ModelDetector det(detectors::ModelArtifact(p), "tree");
  const auto s = evaluate_over_pipe(det, ds.test, DeviceProfile{}, {.model_name = "tree", .seed = 3});
  const auto d = evaluate_direct(det, ds.test, DeviceProfile{}, "tree", 3);
  EXPECT_EQ(s.report.final_score, d.final_score);
  EXPECT_EQ(scoring::to_json(s.report), scoring::to_json(d));
}

TEST(Session, RetransmitsCorruptedFrames) {
  const auto segs = first_segments(10);
  const OracleDetector det(segs);
  HostOptions o;
  o.corrupt_once = {2, 7};
  const auto s = evaluate_over_pipe(det, segs, DeviceProfile{}, o);
  EXPECT_EQ(s.error_frames, 2u);
  EXPECT_EQ(s.retransmissions, 2u);
  EXPECT_EQ(s.metrics.inference_count, 10u);
  EXPECT_EQ(s.report.f_beta, 1.0);
}

TEST(Session, FrameTimeoutNamesSegment) {
  const auto segs = first_segments(3);
  auto [host, device] = make_pipe();
  HostOptions o;
  o.frame_timeout = 50ms;
  try {
    host_evaluate(*host, segs, DeviceProfile{}, o);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find(segs[0].patient_id), std::string::npos) << e.what();
  }
}

TEST(Session, TcpLoopback) {
  const auto segs = first_segments(20);
  const OracleDetector det(segs);
  TcpListener listener(Endpoint::parse("127.0.0.1:0"));
  ASSERT_NE(listener.port(), 0);
  std::exception_ptr device_error;
  std::thread device([&] {
    try {
      auto conn = listener.accept(5s);
      device_serve(*conn, det, DeviceProfile{});
    } catch (...) {
      device_error = std::current_exception();
    }
  });
  auto stream = TcpStream::connect({"127.0.0.1", listener.port()}, 5s);
  const auto s = host_evaluate(*stream, segs, DeviceProfile{});
  device.join();
  if (device_error) std::rethrow_exception(device_error);
  EXPECT_EQ(s.report.segments, 20u);
  EXPECT_EQ(s.report.f_beta, 1.0);
}

TEST(Endpoint, Parse) {
  const auto e = Endpoint::parse("localhost:5555");
  EXPECT_EQ(e.host, "localhost");
  EXPECT_EQ(e.port, 5555);
  EXPECT_EQ(e.to_string(), "localhost:5555");
  EXPECT_THROW(Endpoint::parse("nohost"), ConfigError);
  EXPECT_THROW(Endpoint::parse("h:99999"), ConfigError);
  EXPECT_THROW(Endpoint::parse("h:abc"), ConfigError);
}

// ---- search

namespace {

detectors::CnnConfig quick(detectors::CnnConfig c) {
  c.training.epochs = 3;
  c.training.swa_start_epoch = 2;
  c.training.learning_rate = 2e-3;
  return c;
}

}  // namespace

TEST(Search, SingleCandidate) {
  const std::vector<detectors::CnnConfig> space = {quick({})};
  SearchOptions o;
  o.short_epochs = 2;
  o.seed = 1;
  const auto r = hardware_aware_search(space, small_dataset().train, DeviceProfile{}, 1, o);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.best_index, 0u);
  EXPECT_EQ(r.trace[0].status, CandidateStatus::Evaluated);
  ASSERT_TRUE(r.trace[0].final_score.has_value());
  EXPECT_EQ(r.model.mac_count(), 11875u);
  EXPECT_EQ(r.trace[0].macs, 11875u);
  EXPECT_EQ(r.validation_report.model_name.empty(), false);
}

TEST(Search, CostGrowsWithChannels) {
  auto a = quick({});
  a.out_channels = 3;
  auto b = a;
  b.out_channels = 16;
  const std::vector<detectors::CnnConfig> space = {a, b};
  SearchOptions o;
  o.short_epochs = 1;
  o.retrain_winner = false;
  const auto r = hardware_aware_search(space, small_dataset().train, DeviceProfile{}, 2, o);
  ASSERT_EQ(r.trace.size(), 2u);
  EXPECT_LT(r.trace[0].macs, r.trace[1].macs);
  EXPECT_LT(r.trace[0].model_bytes, r.trace[1].model_bytes);
  EXPECT_GE(r.trace[0].latency_score, r.trace[1].latency_score);
  EXPECT_GE(r.trace[0].memory_score, r.trace[1].memory_score);
}

TEST(Search, RejectsNonCompliantAndBudget) {
  auto huge = quick({});
  huge.kernel_size = 8;
  huge.stride = 1;
  huge.out_channels = 16;  // ~1.6 MB of dense weights, far over the flash budget
  const std::vector<detectors::CnnConfig> space = {huge, quick({})};
  SearchOptions o;
  o.short_epochs = 1;
  o.retrain_winner = false;
  const auto r = hardware_aware_search(space, small_dataset().train, DeviceProfile{}, 5, o);
  ASSERT_EQ(r.trace.size(), 2u);
  EXPECT_EQ(r.trace[0].status, CandidateStatus::NonCompliant);
  EXPECT_FALSE(r.trace[0].f_beta.has_value());
  EXPECT_EQ(r.best_index, 1u);
  EXPECT_THROW(hardware_aware_search(std::span(space).first(1), small_dataset().train,
                                     DeviceProfile{}, 1, o),
               SearchError);
  const auto csv = trace_csv(r.trace);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Search, DefaultSpaceStartsWithDefault) {
  const auto space = default_search_space();
  ASSERT_EQ(space.size(), 12u);
  const detectors::CnnConfig d;
  EXPECT_EQ(space[0].kernel_size, d.kernel_size);
  EXPECT_EQ(space[0].stride, d.stride);
  EXPECT_EQ(space[0].out_channels, d.out_channels);
  EXPECT_EQ(space[0].hidden, d.hidden);
  for (const auto& c : space) EXPECT_NO_THROW(c.validate());
}
