#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "tinyva/bytes.hpp"
#include "tinyva/iegm/dataset.hpp"

namespace tinyva::iegm {

// Directory layout:
//   manifest.json
//   segments/<split>/<patient>-<LABEL>-<index>.seg
//
// .seg file: ASCII line "TINYVA1 <LABEL> <patient_id>\n", 1250 little-endian
// f32 samples, then the CRC-32 of those 5000 payload bytes (u32 LE).

inline constexpr std::string_view kSegmentMagic = "TINYVA1";

Bytes encode_segment_file(const IegmSegment& seg);

/// `source` is used only to name the file in error messages.
IegmSegment decode_segment_file(std::span<const std::uint8_t> bytes, const std::string& source);

std::string segment_file_name(const IegmSegment& seg);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text, const std::string& source);

/// Writes the manifest and every segment. Each segment's patient must belong to
/// one of the manifest's splits.
void write_dataset(const DatasetManifest& manifest, std::span<const IegmSegment> segments,
                   const std::filesystem::path& dir);

/// Reads and verifies a dataset: header tokens, payload CRCs, split membership
/// and the manifest counts. Segments come back ordered by (patient, index).
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace tinyva::iegm
