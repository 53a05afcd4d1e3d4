#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mdeeg/data.hpp"

namespace mdeeg::io {

// Dataset layout, one directory per subject:
//   <root>/<subject>/recording.f32le  row-major float32 LE, 4 x n_samples
//   <root>/<subject>/recording.meta   key=value: sample_rate, channels, n_samples
//   <root>/<subject>/labels.tsv       window_index<TAB>paas_score
// All readers throw mdeeg::DataError on malformed input.

void write_recording(const std::filesystem::path& subject_dir, const EegRecording& rec);
EegRecording read_recording(const std::filesystem::path& subject_dir);

/// Reads every subject directory under root (sorted by name).
std::vector<EegRecording> read_dataset(const std::filesystem::path& root);
void write_dataset(const std::filesystem::path& root, const std::vector<EegRecording>& recordings);

std::vector<PaasScore> read_labels(const std::filesystem::path& file);
void write_labels(const std::filesystem::path& file, const std::vector<PaasScore>& scores);

/// Parses a CSV with header `t,ch1,ch2,ch3,ch4` (time column ignored) into a recording.
EegRecording import_csv(const std::filesystem::path& csv, const std::string& subject_id, double sample_rate,
                        std::vector<PaasScore> scores);

/// Little-endian float32 array helpers shared by the map and checkpoint writers.
void append_f32le(std::string& out, float value);
float read_f32le(const char* bytes);
void write_f32le_file(const std::filesystem::path& file, const std::vector<float>& values);
std::vector<float> read_f32le_file(const std::filesystem::path& file);

}  // namespace mdeeg::io
