#include "tinyva/cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tinyva/detectors/peak_tree.hpp"
#include "tinyva/detectors/quantize.hpp"
#include "tinyva/detectors/training.hpp"
#include "tinyva/errors.hpp"
#include "tinyva/harness/search.hpp"
#include "tinyva/harness/session.hpp"
#include "tinyva/iegm/dataset.hpp"
#include "tinyva/iegm/dataset_io.hpp"

namespace tinyva::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::vector<std::string> kSubcommands = {"generate", "train",  "tune",       "serve",
                                               "evaluate", "search", "leaderboard"};

struct Common {
  std::uint64_t seed{kDefaultSeed};
  std::string config;
  std::string out{"."};
};

struct ProfileFlags {
  harness::DeviceProfile profile;
};

struct CnnFlags {
  detectors::CnnConfig config;
  std::string flip{"amplitude"};
  bool no_flip{false};
};

struct DetectorFlags {
  std::string data;
  std::string model;
  std::string detector;
};

struct Options {
  Common common;
  ProfileFlags profile;
  CnnFlags cnn;
  DetectorFlags source;
  // generate
  std::size_t patients{90};
  double train_fraction{0.85};
  int episodes_min{3};
  int episodes_max{6};
  // train
  bool int8{false};
  // tune
  std::vector<double> factors{1.5, 2.0, 2.5};
  std::uint32_t threshold_min{1};
  std::uint32_t threshold_max{40};
  // serve / evaluate
  std::string listen{"127.0.0.1:5555"};
  std::string port_file;
  int sessions{1};
  std::int64_t idle_timeout_ms{600'000};
  std::string connect;
  std::string name;
  std::int64_t frame_timeout_ms{5000};
  int max_retries{3};
  std::vector<std::uint32_t> corrupt;
  // search
  std::size_t budget{12};
  int short_epochs{20};
  double validation_fraction{0.2};
  bool no_retrain{false};
  // leaderboard
  std::string rows;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--seed", c.seed, "Seed for every random choice of the run");
  sub.add_option("--config", c.config, "JSON file with flag values (command line wins)");
  sub.add_option("--out", c.out, "Output directory");
}

void add_profile(CLI::App& sub, ProfileFlags& p) {
  sub.add_option("--clock-hz", p.profile.clock_hz, "Device clock");
  sub.add_option("--cycles-per-mac", p.profile.cycles_per_mac, "Cycles per multiply-accumulate");
  sub.add_option("--overhead-cycles", p.profile.per_inference_overhead_cycles,
                 "Fixed cycles per inference");
  sub.add_option("--flash-kib", p.profile.flash_kib, "Device flash size");
  sub.add_option("--base-kib", p.profile.base_program_kib, "Flash used by the base program");
  sub.add_option("--active-mw", p.profile.active_power_mw, "Active power for the energy estimate");
}

void add_cnn(CLI::App& sub, CnnFlags& c) {
  auto& t = c.config.training;
  sub.add_option("--epochs", t.epochs, "Training epochs");
  sub.add_option("--lr", t.learning_rate, "Initial learning rate");
  sub.add_option("--batch-size", t.batch_size, "Mini-batch size");
  sub.add_option("--swa-start", t.swa_start_epoch, "First epoch (1-based) in the weight average");
  sub.add_option("--noise", t.noise_sigma_fraction, "Augmentation noise, fraction of segment std");
  sub.add_option("--flip", c.flip, "Flip augmentation: amplitude or time")
      ->check(CLI::IsMember({"amplitude", "time"}));
  sub.add_flag("--no-flip", c.no_flip, "Disable flip augmentation");
  sub.add_option("--kernel", c.config.kernel_size, "Conv kernel size");
  sub.add_option("--stride", c.config.stride, "Conv stride");
  sub.add_option("--channels", c.config.out_channels, "Conv output channels");
  sub.add_option("--hidden", c.config.hidden, "Hidden dense widths")->expected(1, -1);
}

void add_source(CLI::App& sub, DetectorFlags& d, bool need_data) {
  auto* data = sub.add_option("--data", d.data, "Dataset directory");
  if (need_data) data->required();
  sub.add_option("--model", d.model, "Model file");
  sub.add_option("--detector", d.detector, "Built-in detector instead of a model file")
      ->check(CLI::IsMember({"oracle", "always-va", "always-nonva"}));
}

detectors::CnnConfig resolve_cnn(const CnnFlags& f) {
  auto c = f.config;
  c.training.augment_flip = !f.no_flip;
  c.training.flip_mode = f.flip == "time" ? iegm::FlipMode::Time : iegm::FlipMode::Amplitude;
  c.validate();
  return c;
}

// ---- config file and resolved config ------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed: " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

std::string flag_name(const std::string& token) {
  return token.substr(2, token.find('=') == std::string::npos ? std::string::npos : token.find('=') - 2);
}

/// Expands --config into explicit flags placed right after the subcommand.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) {
    return std::find(kSubcommands.begin(), kSubcommands.end(), a) != kSubcommands.end();
  });
  if (sub == args.end()) return args;

  std::string path;
  std::set<std::string> given;
  for (auto it = sub + 1; it != args.end(); ++it) {
    if (it->rfind("--", 0) != 0) continue;
    const auto name = flag_name(*it);
    given.insert(name);
    if (name == "config") {
      if (it->find('=') != std::string::npos) {
        path = it->substr(it->find('=') + 1);
      } else if (it + 1 != args.end()) {
        path = *(it + 1);
      }
    }
  }
  if (path.empty()) return args;

  json cfg;
  try {
    cfg = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError(path + ": expected a JSON object of flag values");

  std::vector<std::string> injected;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "subcommand") {
      if (value != *sub) throw ConfigError(path + ": config is for '" + value.dump() + "'");
      continue;
    }
    if (key == "config" || given.count(key) != 0 || value.is_null()) continue;
    const std::string flag = "--" + key;
    auto scalar = [&](const json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number() || v.is_boolean()) return v.dump();
      throw ConfigError(path + ": unsupported value for '" + key + "'");
    };
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
    } else if (value.is_array()) {
      if (value.empty()) continue;
      injected.push_back(flag);
      for (const auto& v : value) injected.push_back(scalar(v));
    } else {
      injected.push_back(flag);
      injected.push_back(scalar(value));
    }
  }
  std::vector<std::string> out(args.begin(), sub + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), sub + 1, args.end());
  return out;
}

json typed_value(const std::string& s) {
  if (s.empty()) return s;
  std::int64_t i = 0;
  const char* end = s.data() + s.size();
  if (auto [p, ec] = std::from_chars(s.data(), end, i); ec == std::errc{} && p == end) return i;
  if (auto [p, ec] = std::from_chars(s.data(), end, i); ec == std::errc::result_out_of_range) {
    std::uint64_t u = 0;
    if (auto [q, ec2] = std::from_chars(s.data(), end, u); ec2 == std::errc{} && q == end) return u;
  }
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(s.data(), end, d); ec == std::errc{} && p == end) return d;
  return s;
}

/// Every flag of the subcommand with its effective value, loadable via --config.
json resolved_config(const CLI::App& sub) {
  json j;
  j["subcommand"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (values.empty()) {
      std::string def = opt->get_default_str();
      if (opt->get_expected_max() > 1) {
        // Vector defaults are captured as "[a,b]".
        if (def.size() >= 2 && def.front() == '[') def = def.substr(1, def.size() - 2);
        std::stringstream ss(def);
        for (std::string item; std::getline(ss, item, ',');) values.push_back(item);
      } else {
        values.push_back(def);
      }
    }
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(typed_value(v));
      j[name] = arr;
    } else {
      j[name] = typed_value(values.back());
    }
  }
  return j;
}

// ---- shared helpers -----------------------------------------------------

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json cnn_config_json(const detectors::CnnConfig& c) {
  json j;
  j["input_length"] = c.input_length;
  j["kernel_size"] = c.kernel_size;
  j["stride"] = c.stride;
  j["out_channels"] = c.out_channels;
  j["hidden"] = c.hidden;
  j["outputs"] = c.outputs;
  j["epochs"] = c.training.epochs;
  j["learning_rate"] = c.training.learning_rate;
  j["batch_size"] = c.training.batch_size;
  j["swa_start_epoch"] = c.training.swa_start_epoch;
  j["augment_flip"] = c.training.augment_flip;
  j["flip_mode"] = c.training.flip_mode == iegm::FlipMode::Time ? "time" : "amplitude";
  j["noise_sigma_fraction"] = c.training.noise_sigma_fraction;
  return j;
}

json cost_json(const detectors::ModelArtifact& model, const harness::DeviceProfile& profile) {
  json j;
  j["kind"] = std::string(detectors::to_string(model.kind()));
  j["macs"] = model.mac_count();
  j["model_bytes"] = model.serialized_size_bytes();
  j["latency_ms"] = harness::modeled_latency_us(model.mac_count(), profile) / 1000.0;
  j["flash_kib"] = harness::flash_footprint_bytes(model.serialized_size_bytes(), profile) / 1024.0;
  return j;
}

/// F-beta of `model` on `segments`, or null when undefined (no VA segments).
json f_beta_or_null(const detectors::ModelArtifact& model,
                    std::span<const iegm::IegmSegment> segments,
                    const harness::DeviceProfile& profile) {
  const bool has_va = std::any_of(segments.begin(), segments.end(), [](const auto& s) {
    return s.main() == iegm::MainCategory::VA;
  });
  if (!has_va) return nullptr;
  const harness::ModelDetector det(model, "model");
  return harness::evaluate_direct(det, segments, profile, "model").f_beta;
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

std::unique_ptr<harness::Detector> make_detector(const DetectorFlags& f,
                                                 const std::vector<iegm::IegmSegment>& all) {
  if (!f.model.empty() && !f.detector.empty()) {
    throw ConfigError("use either --model or --detector, not both");
  }
  if (!f.model.empty()) {
    return std::make_unique<harness::ModelDetector>(detectors::ModelArtifact::load(f.model),
                                                    fs::path(f.model).stem().string());
  }
  if (f.detector == "oracle") {
    if (all.empty()) throw ConfigError("the oracle detector needs --data");
    return std::make_unique<harness::OracleDetector>(all);
  }
  if (f.detector == "always-va") {
    return std::make_unique<harness::ConstantDetector>(iegm::MainCategory::VA);
  }
  if (f.detector == "always-nonva") {
    return std::make_unique<harness::ConstantDetector>(iegm::MainCategory::NonVA);
  }
  throw ConfigError("one of --model or --detector is required");
}

std::vector<iegm::IegmSegment> all_segments(const iegm::Dataset& ds) {
  std::vector<iegm::IegmSegment> all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  return all;
}

// ---- subcommands --------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out) {
  auto profile = iegm::RhythmProfile::default_profile();
  profile.episodes_min = o.episodes_min;
  profile.episodes_max = o.episodes_max;
  const auto ds = iegm::generate_dataset(profile, o.patients, o.train_fraction, o.common.seed);
  iegm::write_dataset(ds.manifest, all_segments(ds), o.common.out);

  out << "patients: " << ds.manifest.train_patients.size() << " train / "
      << ds.manifest.test_patients.size() << " test\n";
  out << std::left << std::setw(8) << "class" << std::right << std::setw(8) << "train"
      << std::setw(8) << "test" << std::setw(8) << "total" << '\n';
  std::size_t va[2] = {0, 0}, nonva[2] = {0, 0};
  for (const auto s : iegm::kAllSubCategories) {
    const auto i = iegm::index_of(s);
    const auto tr = ds.manifest.train_counts[i];
    const auto te = ds.manifest.test_counts[i];
    auto& bucket = iegm::main_category(s) == iegm::MainCategory::VA ? va : nonva;
    bucket[0] += tr;
    bucket[1] += te;
    out << std::left << std::setw(8) << iegm::to_string(s) << std::right << std::setw(8) << tr
        << std::setw(8) << te << std::setw(8) << tr + te << '\n';
  }
  out << std::left << std::setw(8) << "VA" << std::right << std::setw(8) << va[0] << std::setw(8)
      << va[1] << std::setw(8) << va[0] + va[1] << '\n';
  out << std::left << std::setw(8) << "non-VA" << std::right << std::setw(8) << nonva[0]
      << std::setw(8) << nonva[1] << std::setw(8) << nonva[0] + nonva[1] << '\n';
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto config = resolve_cnn(o.cnn);
  const auto ds = iegm::read_dataset(o.source.data);
  if (ds.train.empty()) throw ConfigError(o.source.data + ": training split is empty");
  const auto& profile = o.profile.profile;
  profile.validate();

  const auto result = detectors::train_cnn(config, ds.train, o.common.seed);
  const detectors::ModelArtifact model =
      o.int8 ? detectors::quantize_int8(result.model, ds.train) : result.model;
  const fs::path model_path = fs::path(o.common.out) / "model.tvam";
  model.save(model_path);

  json r;
  r["seed"] = o.common.seed;
  r["config"] = cnn_config_json(config);
  r["model"] = model_path.filename().string();
  r["cost"] = cost_json(model, profile);
  r["init_hash"] = hex32(crc32(detectors::ModelArtifact(result.initial).serialize()));
  r["weights_hash"] = hex32(crc32(result.model.serialize()));
  r["swa_snapshots"] = result.report.swa_snapshots;
  r["epoch_loss"] = result.report.epoch_loss;
  r["epoch_learning_rate"] = result.report.epoch_learning_rate;
  r["train_f_beta"] = f_beta_or_null(model, ds.train, profile);
  r["heldout_f_beta"] = f_beta_or_null(model, ds.test, profile);
  write_text(fs::path(o.common.out) / "train_report.json", r.dump(2) + "\n");

  out << "trained " << config.training.epochs << " epochs, final loss "
      << fixed(result.report.epoch_loss.empty() ? 0.0 : result.report.epoch_loss.back(), 4)
      << "\n";
  out << "model " << model_path.string() << " (" << model.serialized_size_bytes() << " bytes, "
      << model.mac_count() << " MACs)\n";
  if (!r["heldout_f_beta"].is_null()) {
    out << "held-out F-beta " << fixed(r["heldout_f_beta"].get<double>(), 4) << "\n";
  }
  return kExitOk;
}

int cmd_tune(const Options& o, std::ostream& out) {
  const auto ds = iegm::read_dataset(o.source.data);
  if (o.threshold_min > o.threshold_max) throw ConfigError("empty threshold range");
  std::vector<std::uint32_t> thresholds;
  for (auto t = o.threshold_min; t <= o.threshold_max; ++t) thresholds.push_back(t);
  const auto& profile = o.profile.profile;
  profile.validate();

  const auto tuning = detectors::tune_peak_tree(ds.train, o.factors, thresholds);
  const detectors::ModelArtifact model(tuning.params);
  const fs::path model_path = fs::path(o.common.out) / "peak_tree.tvam";
  model.save(model_path);

  json r;
  r["seed"] = o.common.seed;
  r["factor"] = tuning.params.factor;
  r["peak_threshold"] = tuning.params.peak_threshold;
  r["model"] = model_path.filename().string();
  r["cost"] = cost_json(model, profile);
  r["train_f_beta"] = tuning.f_beta;
  r["heldout_f_beta"] = f_beta_or_null(model, ds.test, profile);
  write_text(fs::path(o.common.out) / "tune_report.json", r.dump(2) + "\n");

  out << "factor " << scoring::format_number(tuning.params.factor) << ", threshold "
      << tuning.params.peak_threshold << ", train F-beta " << fixed(tuning.f_beta, 4) << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
  std::vector<iegm::IegmSegment> all;
  if (!o.source.data.empty()) all = all_segments(iegm::read_dataset(o.source.data));
  const auto detector = make_detector(o.source, all);
  const auto& profile = o.profile.profile;
  profile.validate();
  if (o.sessions < 1) throw ConfigError("--sessions must be >= 1");

  harness::TcpListener listener(harness::Endpoint::parse(o.listen));
  const auto ep = harness::Endpoint{harness::Endpoint::parse(o.listen).host, listener.port()};
  if (!o.port_file.empty()) write_text(o.port_file, std::to_string(listener.port()) + "\n");
  out << "serving " << detector->name() << " on " << ep.to_string() << std::endl;

  const std::chrono::milliseconds idle(o.idle_timeout_ms);
  for (int s = 0; s < o.sessions; ++s) {
    auto stream = listener.accept(idle);
    const auto stats = harness::device_serve(*stream, *detector, profile, {idle});
    out << "session " << s + 1 << ": " << stats.inferences << " inferences, "
        << stats.error_frames << " error frames" << std::endl;
  }
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto ds = iegm::read_dataset(o.source.data);
  if (ds.test.empty()) throw ConfigError(o.source.data + ": test split is empty");
  const auto& profile = o.profile.profile;
  profile.validate();

  harness::HostOptions host;
  host.seed = o.common.seed;
  host.frame_timeout = std::chrono::milliseconds(o.frame_timeout_ms);
  host.max_retries = o.max_retries;
  host.corrupt_once.insert(o.corrupt.begin(), o.corrupt.end());

  harness::EvalSession session;
  if (!o.connect.empty()) {
    host.model_name = o.name.empty() ? "remote" : o.name;
    if (!o.source.model.empty() || !o.source.detector.empty()) {
      throw ConfigError("--connect evaluates the remote device; drop --model/--detector");
    }
    auto stream = harness::TcpStream::connect(harness::Endpoint::parse(o.connect), host.frame_timeout);
    session = harness::host_evaluate(*stream, ds.test, profile, host);
  } else {
    const auto detector = make_detector(o.source, all_segments(ds));
    host.model_name = o.name.empty() ? detector->name() : o.name;
    session = harness::evaluate_over_pipe(*detector, ds.test, profile, host);
  }
  const auto& report = session.report;
  if (report.model_name.empty() ||
      report.model_name.find_first_not_of(
          "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_.-") != std::string::npos) {
    throw ConfigError("model name '" + report.model_name + "' may only use letters, digits, '_', '.', '-'");
  }
  const fs::path dir = o.common.out;
  write_text(dir / (report.model_name + ".json"), scoring::to_json(report));
  write_text(dir / (report.model_name + ".row.csv"),
             scoring::csv_header() + "\n" + scoring::to_csv_row(report) + "\n");

  out << report.model_name << ": F-beta " << fixed(report.f_beta, 4) << ", latency "
      << fixed(report.avg_latency_ms, 4) << " ms, flash " << fixed(report.flash_kib, 2)
      << " KiB, FS " << fixed(report.final_score, 4) << "\n";
  if (session.error_frames > 0) {
    out << session.error_frames << " error frames, " << session.retransmissions
        << " retransmissions\n";
  }
  if (!report.compliant()) {
    out << "NON-COMPLIANT:" << (report.latency_compliant ? "" : " latency")
        << (report.memory_compliant ? "" : " flash") << "\n";
    return kExitNonCompliant;
  }
  return kExitOk;
}

int cmd_search(const Options& o, std::ostream& out) {
  const auto ds = iegm::read_dataset(o.source.data);
  const auto& profile = o.profile.profile;
  profile.validate();
  const auto base = resolve_cnn(o.cnn);

  auto space = harness::default_search_space();
  for (auto& c : space) c.training = base.training;

  harness::SearchOptions opts;
  opts.short_epochs = o.short_epochs;
  opts.retrain_winner = !o.no_retrain;
  opts.validation_fraction = o.validation_fraction;
  opts.seed = o.common.seed;
  const auto result = harness::hardware_aware_search(space, ds.train, profile, o.budget, opts);

  const fs::path dir = o.common.out;
  write_text(dir / "trace.csv", harness::trace_csv(result.trace));
  result.model.save(dir / "model.tvam");
  json r;
  r["seed"] = o.common.seed;
  r["budget"] = o.budget;
  r["short_epochs"] = o.short_epochs;
  r["retrained"] = opts.retrain_winner;
  r["best_index"] = result.best_index;
  r["best_config"] = cnn_config_json(result.best_config);
  r["cost"] = cost_json(result.model, profile);
  r["validation_report"] = json::parse(scoring::to_json(result.validation_report));
  write_text(dir / "search_report.json", r.dump(2) + "\n");

  out << std::left << std::setw(6) << "index" << std::setw(16) << "status" << std::right
      << std::setw(8) << "macs" << std::setw(10) << "bytes" << std::setw(10) << "F-beta"
      << std::setw(10) << "FS" << '\n';
  for (const auto& c : result.trace) {
    out << std::left << std::setw(6) << c.index << std::setw(16) << harness::to_string(c.status)
        << std::right << std::setw(8) << c.macs << std::setw(10) << c.model_bytes << std::setw(10)
        << (c.f_beta ? fixed(*c.f_beta, 4) : "-") << std::setw(10)
        << (c.final_score ? fixed(*c.final_score, 3) : "-") << '\n';
  }
  out << "winner: candidate " << result.best_index << '\n';
  return kExitOk;
}

int cmd_leaderboard(const Options& o, std::ostream& out) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(o.rows, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 8 && name.ends_with(".row.csv")) {
      files.push_back(entry.path());
    }
  }
  if (ec) throw ConfigError("cannot list " + o.rows + ": " + ec.message());
  if (files.empty()) throw LoadError(o.rows + ": no *.row.csv files");
  std::sort(files.begin(), files.end());

  std::vector<scoring::LeaderboardRow> rows;
  for (const auto& f : files) rows.push_back(scoring::parse_leaderboard_file(read_text(f), f.string()));
  scoring::rank_leaderboard(rows);
  const auto table = scoring::leaderboard_table(rows);
  write_text(fs::path(o.common.out) / "leaderboard.txt", table);
  write_text(fs::path(o.common.out) / "leaderboard.csv", scoring::leaderboard_csv(rows));
  out << table;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Ventricular arrhythmia detection benchmark", "tinyva"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto* gen = app.add_subcommand("generate", "Generate a synthetic patient-wise dataset");
  add_common(*gen, o.common);
  gen->add_option("--patients", o.patients, "Number of patients");
  gen->add_option("--train-fraction", o.train_fraction, "Fraction of patients in the train split");
  gen->add_option("--episodes-min", o.episodes_min, "Fewest rhythm episodes per patient");
  gen->add_option("--episodes-max", o.episodes_max, "Most rhythm episodes per patient");

  auto* train = app.add_subcommand("train", "Train the Conv1D + MLP detector");
  add_common(*train, o.common);
  add_profile(*train, o.profile);
  add_cnn(*train, o.cnn);
  train->add_option("--data", o.source.data, "Dataset directory")->required();
  train->add_flag("--int8", o.int8, "Store the model with int8 post-training quantization");

  auto* tune = app.add_subcommand("tune", "Tune the peak-count decision tree");
  add_common(*tune, o.common);
  add_profile(*tune, o.profile);
  tune->add_option("--data", o.source.data, "Dataset directory")->required();
  tune->add_option("--factors", o.factors, "Factor grid")->expected(1, -1);
  tune->add_option("--threshold-min", o.threshold_min, "Smallest peak threshold in the grid");
  tune->add_option("--threshold-max", o.threshold_max, "Largest peak threshold in the grid");

  auto* serve = app.add_subcommand("serve", "Run a device that serves inferences over TCP");
  add_common(*serve, o.common);
  add_profile(*serve, o.profile);
  add_source(*serve, o.source, false);
  serve->add_option("--listen", o.listen, "host:port to listen on (port 0 picks one)");
  serve->add_option("--port-file", o.port_file, "Write the bound port to this file");
  serve->add_option("--sessions", o.sessions, "Sessions to serve before exiting");
  serve->add_option("--idle-timeout-ms", o.idle_timeout_ms, "Give up after this long without input");

  auto* eval = app.add_subcommand("evaluate", "Stream the test split through a device and score it");
  add_common(*eval, o.common);
  add_profile(*eval, o.profile);
  add_source(*eval, o.source, true);
  eval->add_option("--connect", o.connect, "host:port of a running device (default: in-process)");
  eval->add_option("--name", o.name, "Model name in the report");
  eval->add_option("--frame-timeout-ms", o.frame_timeout_ms, "Per-frame timeout");
  eval->add_option("--max-retries", o.max_retries, "Retransmissions per segment after an error");
  eval->add_option("--corrupt", o.corrupt, "Segment ids sent once with a bad CRC")->expected(1, -1);

  auto* search = app.add_subcommand("search", "Hardware-aware search over detector shapes");
  add_common(*search, o.common);
  add_profile(*search, o.profile);
  add_cnn(*search, o.cnn);
  search->add_option("--data", o.source.data, "Dataset directory")->required();
  search->add_option("--budget", o.budget, "Candidates to consider");
  search->add_option("--short-epochs", o.short_epochs, "Training epochs per candidate");
  search->add_option("--validation-fraction", o.validation_fraction,
                     "Fraction of training patients held out for validation");
  search->add_flag("--no-retrain", o.no_retrain, "Keep the short-budget winner");

  auto* board = app.add_subcommand("leaderboard", "Rank evaluation rows by final score");
  add_common(*board, o.common);
  board->add_option("--rows", o.rows, "Directory of *.row.csv files")->required();

  CLI::App* active = nullptr;
  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    for (auto* sub : {gen, train, tune, serve, eval, search, board}) {
      if (sub->parsed()) active = sub;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    ensure_dir(o.common.out);
    write_text(fs::path(o.common.out) / "run_config.json", resolved_config(*active).dump(2) + "\n");
    const std::string& name = active->get_name();
    if (name == "generate") return cmd_generate(o, out);
    if (name == "train") return cmd_train(o, out);
    if (name == "tune") return cmd_tune(o, out);
    if (name == "serve") return cmd_serve(o, out);
    if (name == "evaluate") return cmd_evaluate(o, out);
    if (name == "search") return cmd_search(o, out);
    return cmd_leaderboard(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace tinyva::cli
