#include "tinyva/iegm/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <tuple>

#include "json.hpp"
#include "tinyva/errors.hpp"

namespace tinyva::iegm {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kPayloadBytes = kSegmentLength * sizeof(float);
constexpr std::size_t kMaxHeaderBytes = 128;

[[noreturn]] void load_error(const std::string& source, std::size_t offset,
                             const std::string& what) {
  throw LoadError(source + " at offset " + std::to_string(offset) + ": " + what);
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open file");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError(path.string() + ": write failed");
}

json counts_to_json(const CategoryCounts& counts) {
  json j = json::object();
  for (SubCategory s : kAllSubCategories) j[std::string(to_string(s))] = counts[index_of(s)];
  return j;
}

std::size_t total(const CategoryCounts& c) {
  std::size_t n = 0;
  for (auto v : c) n += v;
  return n;
}

CategoryCounts counts_from_json(const json& j, const std::string& source) {
  CategoryCounts counts{};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto label = parse_sub_category(it.key());
    if (!label) throw LoadError(source + ": unknown label token '" + it.key() + "' in counts");
    counts[index_of(*label)] = it.value().get<std::size_t>();
  }
  return counts;
}

}  // namespace

std::string segment_file_name(const IegmSegment& seg) {
  char index[16];
  std::snprintf(index, sizeof(index), "%05u", seg.index);
  return seg.patient_id + "-" + std::string(to_string(seg.label)) + "-" + index + ".seg";
}

Bytes encode_segment_file(const IegmSegment& seg) {
  validate_segment(seg);
  if (!is_valid_patient_id(seg.patient_id)) {
    throw ConfigError("invalid patient id '" + seg.patient_id + "'");
  }
  const std::string header =
      std::string(kSegmentMagic) + " " + std::string(to_string(seg.label)) + " " + seg.patient_id + "\n";
  Bytes out(header.begin(), header.end());
  const std::size_t payload_start = out.size();
  for (float x : seg.samples) put_le(out, x);
  put_le(out, crc32(std::span(out).subspan(payload_start, kPayloadBytes)));
  return out;
}

IegmSegment decode_segment_file(std::span<const std::uint8_t> bytes, const std::string& source) {
  const auto limit = std::min(bytes.size(), kMaxHeaderBytes);
  const auto newline = std::find(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(limit),
                                 std::uint8_t{'\n'});
  if (newline == bytes.begin() + static_cast<std::ptrdiff_t>(limit)) {
    load_error(source, 0, "missing header line");
  }
  const std::string header(bytes.begin(), newline);
  const std::size_t header_len = header.size() + 1;

  const auto sp1 = header.find(' ');
  const auto sp2 = sp1 == std::string::npos ? sp1 : header.find(' ', sp1 + 1);
  if (sp2 == std::string::npos || header.find(' ', sp2 + 1) != std::string::npos) {
    load_error(source, 0, "header must be '" + std::string(kSegmentMagic) + " <LABEL> <patient_id>'");
  }
  if (header.substr(0, sp1) != kSegmentMagic) load_error(source, 0, "bad magic");
  const std::string token = header.substr(sp1 + 1, sp2 - sp1 - 1);
  const auto label = parse_sub_category(token);
  if (!label) load_error(source, sp1 + 1, "unknown label token '" + token + "'");
  const std::string patient = header.substr(sp2 + 1);
  if (!is_valid_patient_id(patient)) load_error(source, sp2 + 1, "invalid patient id");

  if (bytes.size() != header_len + kPayloadBytes + sizeof(std::uint32_t)) {
    load_error(source, header_len,
               "expected " + std::to_string(kPayloadBytes + 4) + " payload bytes, found " +
                   std::to_string(bytes.size() - header_len));
  }
  const auto payload = bytes.subspan(header_len, kPayloadBytes);
  const auto stored = get_le<std::uint32_t>(bytes, header_len + kPayloadBytes);
  if (crc32(payload) != stored) load_error(source, header_len + kPayloadBytes, "payload CRC mismatch");

  IegmSegment seg;
  seg.patient_id = patient;
  seg.label = *label;
  seg.samples.resize(kSegmentLength);
  for (std::size_t i = 0; i < kSegmentLength; ++i) {
    seg.samples[i] = get_le<float>(payload, i * sizeof(float));
    if (!std::isfinite(seg.samples[i])) {
      load_error(source, header_len + i * sizeof(float), "non-finite sample");
    }
  }
  return seg;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "tinyva-dataset";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["train_fraction"] = m.train_fraction;
  j["splits"]["train"] = {{"patients", m.train_patients},
                          {"counts", counts_to_json(m.train_counts)},
                          {"total", total(m.train_counts)}};
  j["splits"]["test"] = {{"patients", m.test_patients},
                         {"counts", counts_to_json(m.test_counts)},
                         {"total", total(m.test_counts)}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& source) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "tinyva-dataset") {
      throw LoadError(source + ": not a tinyva dataset manifest");
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    const auto& splits = j.at("splits");
    m.train_patients = splits.at("train").at("patients").get<std::vector<std::string>>();
    m.test_patients = splits.at("test").at("patients").get<std::vector<std::string>>();
    m.train_counts = counts_from_json(splits.at("train").at("counts"), source);
    m.test_counts = counts_from_json(splits.at("test").at("counts"), source);
  } catch (const json::exception& e) {
    throw LoadError(source + " at offset 0: malformed manifest: " + e.what());
  }
  for (const auto& p : m.train_patients) {
    if (m.in_test(p)) throw LoadError(source + ": patient '" + p + "' appears in both splits");
  }
  return m;
}

void write_dataset(const DatasetManifest& manifest, std::span<const IegmSegment> segments,
                   const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "segments" / "train", ec);
  fs::create_directories(dir / "segments" / "test", ec);
  if (ec) throw ConfigError(dir.string() + ": cannot create dataset directory: " + ec.message());

  DatasetManifest counted = manifest;
  record_counts(counted, segments);
  for (const auto& seg : segments) {
    std::string split;
    if (manifest.in_train(seg.patient_id)) {
      split = "train";
    } else if (manifest.in_test(seg.patient_id)) {
      split = "test";
    } else {
      throw ConfigError("patient '" + seg.patient_id + "' is in neither split");
    }
    write_file(dir / "segments" / split / segment_file_name(seg), encode_segment_file(seg));
  }
  const std::string text = manifest_to_json(counted);
  write_file(dir / "manifest.json", Bytes(text.begin(), text.end()));
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const Bytes manifest_bytes = read_file(manifest_path);
  Dataset ds;
  ds.manifest = manifest_from_json(std::string(manifest_bytes.begin(), manifest_bytes.end()),
                                   manifest_path.string());

  for (const bool train : {true, false}) {
    const fs::path split_dir = dir / "segments" / (train ? "train" : "test");
    auto& out = train ? ds.train : ds.test;
    std::vector<fs::path> files;
    if (fs::is_directory(split_dir)) {
      for (const auto& entry : fs::directory_iterator(split_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".seg") files.push_back(entry.path());
      }
    }
    CategoryCounts counts{};
    for (const auto& path : files) {
      IegmSegment seg = decode_segment_file(read_file(path), path.string());
      const bool member = train ? ds.manifest.in_train(seg.patient_id) : ds.manifest.in_test(seg.patient_id);
      if (!member) throw LoadError(path.string() + ": patient '" + seg.patient_id + "' not listed in this split");
      // The window index is carried only by the file name.
      const std::string stem = path.stem().string();
      const auto dash = stem.rfind('-');
      try {
        seg.index = static_cast<std::uint32_t>(std::stoul(stem.substr(dash + 1)));
      } catch (const std::exception&) {
        throw LoadError(path.string() + ": file name lacks a window index");
      }
      ++counts[index_of(seg.label)];
      out.push_back(std::move(seg));
    }
    const auto& expected = train ? ds.manifest.train_counts : ds.manifest.test_counts;
    if (counts != expected) {
      throw LoadError(manifest_path.string() + ": segment counts for split '" +
                      (train ? "train" : "test") + "' do not match files on disk");
    }
    std::sort(out.begin(), out.end(), [](const IegmSegment& a, const IegmSegment& b) {
      return std::tie(a.patient_id, a.index) < std::tie(b.patient_id, b.index);
    });
  }
  return ds;
}

}  // namespace tinyva::iegm
