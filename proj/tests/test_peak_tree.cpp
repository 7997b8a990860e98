#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "tinyva/detectors/model.hpp"
#include "tinyva/detectors/peak_tree.hpp"
#include "tinyva/errors.hpp"
#include "tinyva/iegm/dataset.hpp"

using namespace tinyva;
using namespace tinyva::detectors;
using iegm::MainCategory;
using iegm::SubCategory;

TEST(CountPeaks, FlatSignalHasNone) {
  EXPECT_EQ(count_peaks(std::vector<float>(iegm::kSegmentLength, 0.0f), 2.0), 0u);
  EXPECT_EQ(count_peaks(std::vector<float>(iegm::kSegmentLength, 3.5f), 2.0), 0u);
}

TEST(CountPeaks, TenIsolatedSpikes) {
  const auto x = test::spike_train(10);
  // Direct check of the construction: mean 0.08, population std ~0.89.
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= x.size();
  EXPECT_NEAR(mean, 0.08, 1e-12);
  EXPECT_EQ(count_peaks(x, 2.0), 10u);
}

TEST(CountPeaks, WideBeatIsOnePeakInRunsMode) {
  std::vector<float> x(iegm::kSegmentLength, 0.0f);
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < 6; ++i) x[100 + b * 200 + i] = 8.0f;
  }
  EXPECT_EQ(count_peaks(x, 2.0, PeakCountMode::Runs), 5u);
  EXPECT_EQ(count_peaks(x, 2.0, PeakCountMode::Samples), 30u);
}

TEST(CountPeaks, ScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto x = test::gaussian_samples(seed);
    const auto base = count_peaks(x, 2.0);
    for (float c : {0.5f, 4.0f}) {
      std::vector<float> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * c;
      EXPECT_EQ(count_peaks(y, 2.0), base);
    }
  }
}

TEST(PeakTree, BoundaryIsInclusive) {
  const std::vector<float> flat(iegm::kSegmentLength, 0.0f);
  EXPECT_EQ(peak_tree_classify(flat, {2.0f, 0}), MainCategory::VA);
  const auto nine = test::spike_train(9);
  EXPECT_EQ(count_peaks(nine, 2.0), 9u);
  EXPECT_EQ(peak_tree_classify(nine, {2.0f, 10}), MainCategory::NonVA);
  EXPECT_EQ(peak_tree_classify(nine, {2.0f, 9}), MainCategory::VA);
}

namespace {

std::vector<iegm::IegmSegment> separable_set() {
  std::vector<iegm::IegmSegment> s;
  for (std::size_t n = 20; n < 30; ++n) s.push_back(test::make_segment(test::spike_train(n), SubCategory::VT));
  for (std::size_t n = 3; n <= 10; ++n) s.push_back(test::make_segment(test::spike_train(n), SubCategory::SR));
  return s;
}

}  // namespace

TEST(TunePeakTree, SeparableReachesOne) {
  const std::vector<double> factors = {1.5, 2.0, 2.5};
  std::vector<std::uint32_t> thresholds;
  for (std::uint32_t t = 1; t <= 40; ++t) thresholds.push_back(t);
  const auto r = tune_peak_tree(separable_set(), factors, thresholds);
  EXPECT_EQ(r.f_beta, 1.0);
  const std::vector<double> f2 = {2.0};
  const std::vector<std::uint32_t> t15 = {15};
  EXPECT_EQ(tune_peak_tree(separable_set(), f2, t15).f_beta, 1.0);
}

TEST(TunePeakTree, TieGoesToSmallerThreshold) {
  const std::vector<double> factors = {2.0};
  const std::vector<std::uint32_t> thresholds = {15, 12};
  const auto r = tune_peak_tree(separable_set(), factors, thresholds);
  EXPECT_EQ(r.f_beta, 1.0);
  EXPECT_EQ(r.params.peak_threshold, 12u);
}

TEST(TunePeakTree, TieThenSmallerFactor) {
  const std::vector<double> factors = {2.5, 1.5};
  const std::vector<std::uint32_t> thresholds = {15};
  EXPECT_FLOAT_EQ(tune_peak_tree(separable_set(), factors, thresholds).params.factor, 1.5f);
}

TEST(TunePeakTree, Errors) {
  std::vector<iegm::IegmSegment> only_va;
  only_va.push_back(test::make_segment(test::spike_train(20), SubCategory::VT));
  const std::vector<double> f = {2.0};
  const std::vector<std::uint32_t> t = {10};
  EXPECT_THROW(tune_peak_tree(only_va, f, t), TuningError);
  EXPECT_THROW(tune_peak_tree(separable_set(), {}, t), ConfigError);
  EXPECT_THROW(tune_peak_tree(separable_set(), f, {}), ConfigError);
}

TEST(TunePeakTree, TunedOnSyntheticSplitSeparatesSpikeTrains) {
  const auto ds = iegm::generate_dataset(iegm::RhythmProfile::default_profile(), 20, 0.85, 3);
  const std::vector<double> factors = {1.5, 2.0, 2.5};
  std::vector<std::uint32_t> thresholds;
  for (std::uint32_t t = 1; t <= 40; ++t) thresholds.push_back(t);
  const auto r = tune_peak_tree(ds.train, factors, thresholds);
  EXPECT_GE(r.f_beta, 0.9);
  EXPECT_EQ(peak_tree_classify(test::spike_train(25), r.params), MainCategory::VA);
  EXPECT_EQ(peak_tree_classify(test::spike_train(7), r.params), MainCategory::NonVA);
}

TEST(PeakTree, MacCountAndSize) {
  const ModelArtifact m(PeakTreeParams{2.0f, 12});
  EXPECT_EQ(m.mac_count(), 2u * iegm::kSegmentLength + kPeakTreeMacConstant);
  EXPECT_EQ(m.mac_count(), 2502u);
  EXPECT_EQ(m.serialized_size_bytes(), m.serialize().size());
  EXPECT_EQ(m.serialize().size(), 14u);
  EXPECT_EQ(ModelArtifact::deserialize(m.serialize()), m);
}
