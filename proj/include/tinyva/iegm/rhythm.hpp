#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace tinyva::iegm {

/// Rhythm sub-categories, in label-table order.
enum class SubCategory : std::uint8_t { AFb, AFt, SR, SVT, VFb, VFt, VPD, VT };

/// VA (ventricular arrhythmia) is the positive class.
enum class MainCategory : std::uint8_t { NonVA = 0, VA = 1 };

inline constexpr std::size_t kSubCategoryCount = 8;

inline constexpr std::array<SubCategory, kSubCategoryCount> kAllSubCategories = {
    SubCategory::AFb, SubCategory::AFt, SubCategory::SR,  SubCategory::SVT,
    SubCategory::VFb, SubCategory::VFt, SubCategory::VPD, SubCategory::VT};

constexpr MainCategory main_category(SubCategory s) noexcept {
  switch (s) {
    case SubCategory::VT:
    case SubCategory::VFb:
    case SubCategory::VFt:
      return MainCategory::VA;
    default:
      return MainCategory::NonVA;
  }
}

constexpr std::string_view to_string(SubCategory s) noexcept {
  constexpr std::array<std::string_view, kSubCategoryCount> names = {
      "AFb", "AFt", "SR", "SVT", "VFb", "VFt", "VPD", "VT"};
  return names[static_cast<std::size_t>(s)];
}

constexpr std::string_view to_string(MainCategory m) noexcept {
  return m == MainCategory::VA ? "VA" : "NonVA";
}

constexpr std::optional<SubCategory> parse_sub_category(std::string_view token) noexcept {
  for (SubCategory s : kAllSubCategories) {
    if (to_string(s) == token) return s;
  }
  return std::nullopt;
}

constexpr std::size_t index_of(SubCategory s) noexcept { return static_cast<std::size_t>(s); }

}  // namespace tinyva::iegm
