#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mdeeg {

inline constexpr std::size_t kNumChannels = 4;
inline constexpr double kDefaultSampleRate = 256.0;
inline constexpr double kDefaultWindowSeconds = 10.0;

/// Muse-style headband montage, in storage order.
inline const std::array<std::string, kNumChannels> kChannelNames = {"TP9", "AF7", "AF8", "TP10"};

enum class CognitiveLoad : std::uint8_t { Low = 0, High = 1 };

const char* to_string(CognitiveLoad label);

/// Maps a 9-point Paas mental-effort score to the binary label: 1..5 Low, 6..9 High.
/// Throws std::domain_error outside [1, 9].
CognitiveLoad binarize_paas(int score);

struct PaasScore {
  std::size_t window_index = 0;
  int score = 0;
};

/// A continuous multi-channel recording. Samples are stored channel-major
/// (row c holds channel c) in microvolts.
class EegRecording {
 public:
  EegRecording(std::string subject_id, double sample_rate, std::vector<std::vector<double>> channels,
               std::vector<PaasScore> paas_scores,
               std::array<std::string, kNumChannels> channel_names = kChannelNames);

  const std::string& subject_id() const { return subject_id_; }
  double sample_rate() const { return sample_rate_; }
  std::size_t num_samples() const { return channels_.front().size(); }
  double duration_seconds() const { return static_cast<double>(num_samples()) / sample_rate_; }
  const std::array<std::string, kNumChannels>& channel_names() const { return channel_names_; }
  std::span<const double> channel(std::size_t c) const { return channels_.at(c); }
  const std::vector<std::vector<double>>& channels() const { return channels_; }
  const std::vector<PaasScore>& paas_scores() const { return paas_scores_; }

  /// Copy with channel data replaced (same subject, rate and labels).
  EegRecording with_channels(std::vector<std::vector<double>> channels) const;

 private:
  std::string subject_id_;
  double sample_rate_;
  std::array<std::string, kNumChannels> channel_names_;
  std::vector<std::vector<double>> channels_;
  std::vector<PaasScore> paas_scores_;
};

/// One labeled window: 4 rows x n samples, row-major.
class EegSegment {
 public:
  EegSegment(std::string subject_id, std::size_t window_index, double sample_rate, std::size_t num_samples,
             std::vector<double> data, CognitiveLoad label);

  const std::string& subject_id() const { return subject_id_; }
  std::size_t window_index() const { return window_index_; }
  double sample_rate() const { return sample_rate_; }
  std::size_t num_samples() const { return num_samples_; }
  CognitiveLoad label() const { return label_; }

  std::span<const double> channel(std::size_t c) const;
  std::span<const double> data() const { return data_; }

  /// Copy with the sample matrix replaced; the new data must have the same size.
  EegSegment with_data(std::vector<double> data) const;

  friend bool operator==(const EegSegment&, const EegSegment&) = default;

 private:
  std::string subject_id_;
  std::size_t window_index_;
  double sample_rate_;
  std::size_t num_samples_;
  std::vector<double> data_;
  CognitiveLoad label_;
};

struct SegmentationResult {
  std::vector<EegSegment> segments;
  std::size_t missing_label_windows = 0;
};

/// Cuts a recording into non-overlapping windows; the trailing partial window
/// is dropped and windows without a Paas score are skipped and counted.
SegmentationResult segment_recording(const EegRecording& rec, double window_s = kDefaultWindowSeconds);

struct LosoSplit {
  std::string test_subject;
  std::vector<std::string> train_subjects;
};

/// One split per subject, in sorted subject order. Throws std::domain_error for < 2 subjects.
std::vector<LosoSplit> loso_splits(std::vector<std::string> subjects);

/// Sorted unique subject ids appearing in the segments.
std::vector<std::string> subjects_of(std::span<const EegSegment> segments);

struct SynthOptions {
  double sample_rate = kDefaultSampleRate;
  double window_s = kDefaultWindowSeconds;
  double noise_std_uv = 3.0;
};

/// Class-conditional synthetic EEG: band-limited sinusoids with a per-band
/// spatial profile plus 1/f-shaped Gaussian noise. High segments carry about twice the
/// theta amplitude (most at frontal sites) and half the alpha amplitude (least at
/// temporal sites) of Low segments. Subjects differ
/// by per-channel gains, band amplitude jitter, peak frequencies and phase offsets.
/// Labels are balanced per subject (floor(n/2) High). Pure function of its arguments.
std::vector<EegSegment> synth_generate(std::size_t n_subjects, std::size_t segs_per_subject, std::uint64_t seed,
                                       const SynthOptions& options = {});

/// Subject id used by the generator for the i-th synthetic subject ("S01", "S02", ...).
std::string synth_subject_id(std::size_t index);

/// Concatenates each subject's segments (in window order) into one recording,
/// with Paas score 3 for Low windows and 7 for High windows.
std::vector<EegRecording> recordings_from_segments(std::span<const EegSegment> segments);

}  // namespace mdeeg
