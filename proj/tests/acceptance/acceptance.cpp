// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../cnn_oracle.hpp"
#include "tinyva/detectors/peak_tree.hpp"
#include "tinyva/detectors/training.hpp"
#include "tinyva/harness/search.hpp"
#include "tinyva/harness/session.hpp"
#include "tinyva/iegm/dataset.hpp"
#include "tinyva/random.hpp"
#include "tinyva/scoring/metrics.hpp"
#include "tinyva/scoring/report.hpp"

using namespace tinyva;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Check {
  bool ok{true};
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

int failures = 0;

void run(int id, const std::string& title, double limit_s, const std::function<std::string(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  std::string summary;
  try {
    summary = body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(secs < limit_s, "runtime " + std::to_string(secs) + " s over limit");
  if (!c.ok) ++failures;
  std::printf("%s criterion %d: %s [%.2f s / limit %.0f s] %s%s\n", c.ok ? "PASS" : "FAIL", id,
              title.c_str(), secs, limit_s, summary.c_str(),
              c.ok ? "" : (" | " + c.detail.str()).c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Scoring formulas written out independently of the library.
double oracle_latency_score(double ms) { return 1.0 - (ms - 1.0) / 199.0; }
double oracle_memory_score(double kib) { return 1.0 - (kib - 5.0) / 251.0; }
double oracle_f2(double tp, double fn, double fp) {
  return tp == 0 ? 0.0 : 5.0 * tp / (5.0 * tp + 4.0 * fn + fp);
}

// ---- criteria 1-3: scoring

std::string scoring_exactness(Check& c) {
  c.expect(scoring::final_score(1, 1, 1) == 140.0, "FS(1,1,1) != 140");
  c.expect(scoring::latency_score(1) == 1.0, "L(1) != 1");
  c.expect(scoring::latency_score(200) == 0.0, "L(200) != 0");
  c.expect(scoring::memory_score(5) == 1.0, "M(5) != 1");
  c.expect(scoring::memory_score(256) == 0.0, "M(256) != 0");
  return "FS(1,1,1)=" + scoring::format_number(scoring::final_score(1, 1, 1));
}

std::string reported_anchors(Check& c) {
  const double m = scoring::memory_score(11.18);
  const double l = scoring::latency_score(0.22);
  const double lm = (135.43 - 100.0 * 0.972) / 20.0;
  c.expect(std::fabs(m - 0.97538) <= 1e-5, "M(11.18)=" + fmt("%.7f", m));
  c.expect(std::fabs(m - oracle_memory_score(11.18)) <= 1e-15, "M disagrees with oracle");
  c.expect(std::fabs(l - 1.00392) <= 1e-5 && l > 1.0, "L(0.22)=" + fmt("%.7f", l));
  c.expect(std::fabs(l - oracle_latency_score(0.22)) <= 1e-15, "L disagrees with oracle");
  c.expect(std::fabs(lm - 1.9115) <= 5e-4, "L+M=" + fmt("%.6f", lm));
  // Recompose through the library: FS(0.972, L, M) with L + M = lm must give 135.43.
  const double fs = scoring::final_score(0.972, lm - 1.0, 1.0);
  c.expect(std::fabs(fs - 135.43) <= 1e-9, "FS recomposition " + fmt("%.9f", fs));
  return "M=" + fmt("%.6f", m) + " L=" + fmt("%.6f", l) + " L+M=" + fmt("%.5f", lm);
}

std::string f_beta_properties(Check& c) {
  std::mt19937_64 gen(kSeed);
  std::uniform_int_distribution<int> count(0, 200);
  int checked = 0;
  double worst_oracle = 0.0;
  for (int t = 0; t < 10000; ++t) {
    scoring::ConfusionMatrix cm;
    cm.tp = count(gen);
    cm.fn = count(gen);
    cm.fp = count(gen);
    cm.tn = count(gen);
    if (cm.tp + cm.fn == 0) cm.tp = 1;
    const double f = scoring::f_beta(cm);
    if (!(f >= 0.0 && f <= 1.0)) c.expect(false, "F out of range");
    worst_oracle = std::max(worst_oracle, std::fabs(f - oracle_f2(cm.tp, cm.fn, cm.fp)));
    if (cm.fn > 0) {
      auto up = cm;
      --up.fn;
      ++up.tp;
      if (scoring::f_beta(up) < f) c.expect(false, "fn->tp decreased F");
    }
    if (cm.fp > 0) {
      auto up = cm;
      --up.fp;
      ++up.tn;
      if (scoring::f_beta(up) < f) c.expect(false, "fp->tn decreased F");
    }
    const double p = scoring::precision(cm), r = scoring::recall(cm);
    const double lo = std::min(p, r), hi = std::max(p, r);
    if (hi > lo && lo > 0.0) {
      ++checked;
      if (!(scoring::f_beta(lo, hi) > scoring::f_beta(hi, lo))) c.expect(false, "F2(P,R) <= F2(R,P)");
    }
  }
  c.expect(worst_oracle <= 1e-12, "F disagrees with closed form by " + fmt("%.3g", worst_oracle));
  return "10000 matrices, " + std::to_string(checked) + " asymmetry pairs, max |F - oracle| " +
         fmt("%.2g", worst_oracle);
}

// ---- criterion 4: numerical oracles

std::string numerical_oracles(Check& c) {
  std::mt19937_64 gen(kSeed);
  double worst_forward = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto cfg = t == 0 ? detectors::CnnConfig{} : test::random_config(gen);
    const auto model = test::random_model(cfg, gen);
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::vector<float> x(cfg.input_length);
    for (auto& v : x) v = d(gen);
    const auto want = test::naive_forward(model, x);
    const auto got = detectors::cnn_forward(model, x);
    const long double pairs[2][2] = {{got.non_va, want[0]}, {got.va, want[1]}};
    for (const auto& p : pairs) {
      const long double denom = std::fabs(p[1]);
      const double rel = denom > 0 ? static_cast<double>(std::fabs(p[0] - p[1]) / denom)
                                   : static_cast<double>(std::fabs(p[0]));
      worst_forward = std::max(worst_forward, rel);
    }
  }
  c.expect(worst_forward <= 1e-5, "forward relative error " + fmt("%.3g", worst_forward));

  detectors::CnnConfig small;
  small.input_length = 64;
  small.kernel_size = 8;
  small.stride = 4;
  small.out_channels = 2;
  small.hidden = {5, 4};
  detectors::CnnNetwork net(small, kSeed);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (auto& p : net.parameters()) p += jitter(gen);
  std::vector<std::vector<float>> inputs(10, std::vector<float>(small.input_length));
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<detectors::CnnNetwork::Example> batch;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (auto& v : inputs[i]) v = d(gen);
    batch.push_back({inputs[i], i % 2 ? iegm::MainCategory::VA : iegm::MainCategory::NonVA});
  }
  std::vector<double> grad;
  net.loss_and_gradient(batch, grad);
  const double eps = 1e-4;
  double worst_grad = 0.0;
  auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + eps;
    const double up = net.loss(batch);
    params[k] = saved - eps;
    const double down = net.loss(batch);
    params[k] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double scale = std::max(std::fabs(numeric), std::fabs(grad[k]));
    // Gradients that vanish on both sides (dead ReLU paths) agree trivially.
    const double rel = scale > 1e-8 ? std::fabs(numeric - grad[k]) / scale : 0.0;
    worst_grad = std::max(worst_grad, rel);
  }
  c.expect(worst_grad <= 1e-3, "gradient relative error " + fmt("%.3g", worst_grad));
  return "100 models max rel " + fmt("%.2g", worst_forward) + "; " + std::to_string(params.size()) +
         " params max grad rel " + fmt("%.2g", worst_grad);
}

// ---- criterion 5: peak tree invariance

std::string peak_tree_invariance(Check& c) {
  const auto ds = iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 20, 0.5, kSeed);
  std::vector<const iegm::IegmSegment*> segs;
  for (const auto& s : ds.train) segs.push_back(&s);
  for (const auto& s : ds.test) segs.push_back(&s);
  std::mt19937_64 gen(kSeed);
  std::shuffle(segs.begin(), segs.end(), gen);
  c.expect(segs.size() >= 1000, "only " + std::to_string(segs.size()) + " segments");
  segs.resize(std::min<std::size_t>(segs.size(), 1000));

  const detectors::PeakTreeParams params{1.5f, 13};
  std::size_t flips = 0, va = 0;
  for (const auto* s : segs) {
    const auto base = detectors::peak_tree_classify(s->samples, params);
    va += base == iegm::MainCategory::VA;
    for (double scale : {0.1, 3.0, 50.0}) {
      std::vector<float> x(s->samples.begin(), s->samples.end());
      for (auto& v : x) v = static_cast<float>(v * scale);
      flips += detectors::peak_tree_classify(x, params) != base;
    }
    for (double offset : {-5.0, 10.0}) {
      std::vector<float> x(s->samples.begin(), s->samples.end());
      for (auto& v : x) v = static_cast<float>(v + offset);
      flips += detectors::peak_tree_classify(x, params) != base;
    }
  }
  c.expect(flips == 0, std::to_string(flips) + " classification changes");

  std::vector<float> spikes(iegm::kSegmentLength, 0.0f);
  for (std::size_t i = 0; i < 10; ++i) spikes[i * 125 + 60] = 10.0f;
  const auto peaks = detectors::count_peaks(spikes, 1.5);
  c.expect(peaks == 10, "10-spike construction counted " + std::to_string(peaks));
  return std::to_string(segs.size()) + " segments (" + std::to_string(va) +
         " VA) x 5 transforms, " + std::to_string(flips) + " label changes; spikes=" + std::to_string(peaks);
}

// ---- criterion 6: end-to-end benchmark

struct BenchmarkOutcome {
  scoring::ScoreReport tree, cnn;
};

BenchmarkOutcome desk_benchmark(Check& c, std::string& summary) {
  const harness::DeviceProfile profile;
  const auto ds =
      iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 90, 0.85, kSeed);
  c.expect(ds.manifest.train_patients.size() == 76 && ds.manifest.test_patients.size() == 14,
           "split " + std::to_string(ds.manifest.train_patients.size()) + "/" +
               std::to_string(ds.manifest.test_patients.size()));
  for (const auto& p : ds.manifest.test_patients) {
    c.expect(!ds.manifest.in_train(p), "patient " + p + " in both splits");
  }

  const std::vector<double> factors = {1.5, 2.0, 2.5};
  std::vector<std::uint32_t> thresholds;
  for (std::uint32_t t = 1; t <= 40; ++t) thresholds.push_back(t);
  const auto tuning = detectors::tune_peak_tree(ds.train, factors, thresholds);
  const harness::ModelDetector tree(detectors::ModelArtifact(tuning.params), "peak_tree");

  const detectors::CnnConfig cnn_config;
  const auto trained = detectors::train_cnn(cnn_config, ds.train, derive_seed(kSeed, "train"));
  const harness::ModelDetector cnn(trained.model, "cnn");

  BenchmarkOutcome out;
  for (const auto* det : {&tree, &cnn}) {
    harness::HostOptions host;
    host.model_name = det->name();
    host.seed = kSeed;
    const auto session = harness::evaluate_over_pipe(*det, ds.test, profile, host);
    const auto direct = harness::evaluate_direct(*det, ds.test, profile, det->name(), kSeed);
    const auto& r = session.report;
    c.expect(r.f_beta >= 0.90, det->name() + " F=" + fmt("%.4f", r.f_beta));
    c.expect(std::fabs(r.final_score - direct.final_score) <= 1e-9, det->name() + " harness FS != direct FS");
    c.expect(r.flash_kib <= 256.0 && r.memory_compliant, det->name() + " flash " + fmt("%.2f", r.flash_kib));
    c.expect(r.avg_latency_ms <= 200.0 && r.latency_compliant, det->name() + " latency");
    c.expect(session.metrics.inference_count == ds.test.size(), det->name() + " inference count");
    // Independent recomputation of FS from the reported terms.
    const double fs = 100.0 * oracle_f2(r.confusion.tp, r.confusion.fn, r.confusion.fp) +
                      20.0 * oracle_latency_score(r.avg_latency_ms) +
                      20.0 * oracle_memory_score(r.flash_kib);
    c.expect(std::fabs(fs - r.final_score) <= 1e-9, det->name() + " FS disagrees with oracle");
    summary += det->name() + ": F=" + fmt("%.4f", r.f_beta) + " L=" + fmt("%.4f", r.avg_latency_ms) +
               "ms M=" + fmt("%.2f", r.flash_kib) + "KiB FS=" + fmt("%.3f", r.final_score) + "; ";
    (det == &tree ? out.tree : out.cnn) = r;
  }
  summary += "split " + std::to_string(ds.train.size()) + "/" + std::to_string(ds.test.size()) + " segments";
  return out;
}

// ---- criterion 7: protocol robustness

std::string protocol_robustness(Check& c) {
  std::mt19937_64 gen(kSeed);
  std::size_t mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    harness::Message m;
    switch (gen() % 5) {
      case 0: {
        harness::SegmentMsg s;
        s.id = static_cast<std::uint32_t>(gen());
        std::normal_distribution<float> d(0.0f, 100.0f);
        for (auto& v : s.samples) v = d(gen);
        m = s;
        break;
      }
      case 1:
        m = harness::ResultMsg{static_cast<std::uint32_t>(gen()),
                               gen() % 2 ? iegm::MainCategory::VA : iegm::MainCategory::NonVA,
                               static_cast<std::uint32_t>(gen())};
        break;
      case 2:
        m = harness::DoneMsg{};
        break;
      case 3:
        m = harness::MetricsMsg{static_cast<std::uint32_t>(gen()), static_cast<std::uint32_t>(gen())};
        break;
      default:
        m = harness::ErrorMsg{static_cast<harness::ErrorCode>(1 + gen() % 5),
                              static_cast<std::uint32_t>(gen())};
    }
    const auto bytes = harness::encode(m);
    const auto r = harness::decode_frame(bytes);
    const auto back = r.status == harness::DecodeStatus::Ok ? harness::decode_payload(r.frame) : std::nullopt;
    if (!back || *back != m || r.consumed != bytes.size()) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");

  const auto ds = iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 6, 0.5, kSeed);
  const harness::OracleDetector oracle(ds.test);
  const harness::DeviceProfile profile;
  harness::HostOptions clean;
  clean.model_name = "oracle";
  auto faulty = clean;
  const auto target = static_cast<std::uint32_t>(ds.test.size() / 2);
  faulty.corrupt_once = {target};
  const auto a = harness::evaluate_over_pipe(oracle, ds.test, profile, clean);
  const auto b = harness::evaluate_over_pipe(oracle, ds.test, profile, faulty);
  c.expect(a.error_frames == 0, "clean run saw error frames");
  c.expect(b.error_frames == 1, std::to_string(b.error_frames) + " error frames");
  c.expect(b.retransmissions == 1, std::to_string(b.retransmissions) + " retransmissions");
  c.expect(b.records.size() == ds.test.size() && b.metrics.inference_count == ds.test.size(),
           "evaluation incomplete");
  c.expect(scoring::to_json(a.report) == scoring::to_json(b.report), "report changed by the fault");
  return "10000 frames round-tripped; fault on segment " + std::to_string(target) + " of " +
         std::to_string(ds.test.size()) + ": " + std::to_string(b.error_frames) + " ERROR frame";
}

// ---- criterion 8: search

struct SearchOutcome {
  std::string trace;
  scoring::ScoreReport validation;
};

SearchOutcome search_sanity(Check& c, std::string& summary) {
  const harness::DeviceProfile profile;
  const auto ds =
      iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 90, 0.85, kSeed);
  const auto space = harness::default_search_space();
  c.expect(space.size() == 12, "grid has " + std::to_string(space.size()) + " points");
  harness::SearchOptions opts;
  opts.seed = kSeed;
  const auto r = harness::hardware_aware_search(space, ds.train, profile, space.size(), opts);

  // Argmax over scored candidates, earlier index on ties.
  std::optional<std::size_t> argmax;
  std::size_t trained = 0;
  for (const auto& rec : r.trace) {
    if (!rec.final_score) continue;
    ++trained;
    if (!argmax || *rec.final_score > *r.trace[*argmax].final_score) argmax = rec.index;
  }
  c.expect(argmax && *argmax == r.best_index, "winner is not the trace argmax");
  c.expect(r.trace.size() == space.size(), "trace length " + std::to_string(r.trace.size()));

  // Cost-model monotonicity: at equal F, a strictly smaller model (fewer bytes,
  // no more MACs) scores strictly higher.
  std::size_t pairs = 0;
  for (const auto& a : r.trace) {
    for (const auto& b : r.trace) {
      if (!(a.model_bytes < b.model_bytes && a.macs <= b.macs)) continue;
      for (double f : {0.0, 0.5, 0.9, 1.0}) {
        ++pairs;
        if (!(harness::candidate_final_score(f, a.macs, a.model_bytes, profile) >
              harness::candidate_final_score(f, b.macs, b.model_bytes, profile))) {
          c.expect(false, "monotonicity violated for " + std::to_string(a.index) + " vs " +
                              std::to_string(b.index));
        }
      }
    }
  }
  std::mt19937_64 gen(kSeed);
  for (int t = 0; t < 10000; ++t) {
    const std::uint64_t macs = gen() % 2'000'000;
    const std::size_t bytes = 1 + gen() % 200'000;
    const std::uint64_t macs2 = macs + gen() % 1000;
    const std::size_t bytes2 = bytes + 1 + gen() % 1000;
    ++pairs;
    if (!(harness::candidate_final_score(0.9, macs, bytes, profile) >
          harness::candidate_final_score(0.9, macs2, bytes2, profile))) {
      c.expect(false, "random monotonicity violation");
      break;
    }
  }
  summary = "winner " + std::to_string(r.best_index) + " (" + std::to_string(trained) +
            " trained) validation F=" + fmt("%.4f", r.validation_report.f_beta) +
            " FS=" + fmt("%.3f", r.validation_report.final_score) + "; " + std::to_string(pairs) +
            " monotonicity pairs";
  return {harness::trace_csv(r.trace), r.validation_report};
}

}  // namespace

int main() {
  std::printf("tinyva acceptance run, seed %llu\n", static_cast<unsigned long long>(kSeed));
  run(1, "scoring exactness", 1, scoring_exactness);
  run(2, "reported-result anchors", 1, reported_anchors);
  run(3, "F-beta properties", 10, f_beta_properties);
  run(4, "numerical oracles", 120, numerical_oracles);
  run(5, "peak-tree invariance", 30, peak_tree_invariance);

  BenchmarkOutcome first_bench, second_bench;
  run(6, "end-to-end desk benchmark", 30 * 60, [&](Check& c) {
    std::string s;
    first_bench = desk_benchmark(c, s);
    return s;
  });
  run(7, "protocol robustness", 30, protocol_robustness);
  SearchOutcome first_search, second_search;
  run(8, "search sanity", 20 * 60, [&](Check& c) {
    std::string s;
    first_search = search_sanity(c, s);
    return s;
  });
  run(9, "determinism", 50 * 60, [&](Check& c) {
    std::string ignored;
    Check inner;
    second_bench = desk_benchmark(inner, ignored);
    second_search = search_sanity(inner, ignored);
    c.expect(scoring::to_json(first_bench.tree) == scoring::to_json(second_bench.tree),
             "peak-tree report differs");
    c.expect(scoring::to_json(first_bench.cnn) == scoring::to_json(second_bench.cnn), "CNN report differs");
    c.expect(first_search.trace == second_search.trace, "search trace differs");
    c.expect(scoring::to_json(first_search.validation) == scoring::to_json(second_search.validation),
             "search validation report differs");
    return "reports and trace byte-identical across two runs (" +
           std::to_string(first_search.trace.size()) + " trace bytes)";
  });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
