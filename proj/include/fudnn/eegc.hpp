#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fudnn/eeg.hpp"

namespace fudnn {

// EEGC container:
//   bytes 0..7   magic "EEGC\0\0v1"
//   bytes 8..15  header length (uint64, little-endian)
//   header       UTF-8 JSON
//   payload      float32 little-endian, channel-major, entries back to back
inline constexpr int kEegcVersion = 1;

enum class EegcKind { kRecording, kDataset, kWindows };

void save_eegc(const Recording& recording, const std::filesystem::path& path);
void save_eegc(const Dataset& dataset, const std::filesystem::path& path);
void save_eegc(const WindowSet& windows, const std::filesystem::path& path);

EegcKind peek_eegc_kind(const std::filesystem::path& path);
Recording load_recording(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
WindowSet load_windows(const std::filesystem::path& path);

struct CsvImport {
  Recording recording;
  std::map<int, ClassLabel> label_map;
};

// One row per sample, one column per channel, first row holds channel names.
// The sidecar JSON carries {"rate_hz": r, "markers": [[sample, code], ...],
// "labels": {"<code>": "PW", ...}, "reference_note": "..."}.
CsvImport import_csv(const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar_path);

} // namespace fudnn
