#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tinyva/iegm/segment.hpp"

namespace tinyva::test {

inline iegm::IegmSegment make_segment(std::vector<float> samples,
                                      iegm::SubCategory label = iegm::SubCategory::SR,
                                      std::string patient = "P000", std::uint32_t index = 0) {
  iegm::IegmSegment s;
  s.patient_id = std::move(patient);
  s.label = label;
  s.index = index;
  s.samples = std::move(samples);
  return s;
}

/// Zero baseline with `spikes` single-sample spikes of `height`, evenly spaced.
inline std::vector<float> spike_train(std::size_t spikes, float height = 10.0f) {
  std::vector<float> x(iegm::kSegmentLength, 0.0f);
  if (spikes == 0) return x;
  const std::size_t step = iegm::kSegmentLength / spikes;
  for (std::size_t i = 0; i < spikes; ++i) x[i * step + step / 2] = height;
  return x;
}

inline std::vector<float> gaussian_samples(std::uint64_t seed, std::size_t n = iegm::kSegmentLength) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<float> x(n);
  for (auto& v : x) v = d(gen);
  return x;
}

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "tinyva_" + tag;
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace tinyva::test
