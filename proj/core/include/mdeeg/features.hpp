#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdeeg/data.hpp"
#include "mdeeg/dsp.hpp"
#include "mdeeg/spectral.hpp"
#include "mdeeg/topomap.hpp"

// Turns filtered segments into model inputs: the per-channel z-scored raw
// stream and the 15-plane topography tensor built from fold-normalized band
// features.
namespace mdeeg::features {

enum class FeatureKind { Psd, De };

std::string to_string(FeatureKind k);
FeatureKind parse_feature_kind(const std::string& s);  // std::invalid_argument on unknown names

struct FeatureOptions {
  FeatureKind kind = FeatureKind::Psd;
  bool log_power = true;  // log10 of PSD band powers; ignored for DE
};

/// Filters each recording (bandpass then notch) and cuts it into labeled windows.
struct PreparedSegments {
  std::vector<EegSegment> segments;
  std::size_t missing_label_windows = 0;
};
PreparedSegments prepare_segments(std::span<const EegRecording> recordings,
                                  dsp::FilterMode mode = dsp::FilterMode::Causal);

/// Fold-independent per-segment features.
struct SegmentFeatures {
  std::string subject;
  std::size_t window_index = 0;
  int label = 0;                 // 0 Low, 1 High
  std::size_t num_samples = 0;
  std::vector<float> raw;        // 4 x num_samples, each channel z-scored
  spectral::BandMatrix values{}; // log10 power, linear power or DE per channel/band
};

SegmentFeatures extract_features(const EegSegment& filtered, const FeatureOptions& options = {});
std::vector<SegmentFeatures> extract_all(std::span<const EegSegment> filtered, const FeatureOptions& options = {});

/// Per-dimension z-score of the 20 band features, fitted on a set of training
/// subjects. The fitted subject set is kept so callers can assert that a test
/// subject never contributed to the statistics.
class FeatureNormalizer {
 public:
  static constexpr std::size_t kDims = kNumChannels * spectral::kNumBands;

  /// Throws std::domain_error when no row comes from `subjects`.
  static FeatureNormalizer fit(std::span<const SegmentFeatures> rows, std::span<const std::string> subjects);

  spectral::BandMatrix apply(const spectral::BandMatrix& values) const;

  const std::vector<std::string>& fitted_subjects() const { return subjects_; }
  bool was_fitted_on(const std::string& subject) const;
  /// Throws std::logic_error if `subject` contributed to the statistics.
  void assert_excludes(const std::string& subject) const;

  const std::array<double, kDims>& mean() const { return mean_; }
  const std::array<double, kDims>& stddev() const { return std_; }

  void save(const std::filesystem::path& file) const;
  /// Throws mdeeg::DataError on a malformed file.
  static FeatureNormalizer load(const std::filesystem::path& file);

 private:
  std::vector<std::string> subjects_;
  std::array<double, kDims> mean_{};
  std::array<double, kDims> std_{};
};

/// Zero-masking applied at evaluation time.
struct Mask {
  std::optional<std::size_t> keep_channel;  // zero every other raw channel and its band features
  std::optional<spectral::Band> keep_band;  // zero other bands' planes; bandpass the raw stream to this band
};

/// A model-ready sample.
struct Sample {
  std::string subject;
  std::size_t window_index = 0;
  int label = 0;
  std::size_t num_samples = 0;
  std::vector<float> raw;   // [4, num_samples]
  std::vector<float> topo;  // [15, 32, 32]
};

/// Normalized, centered band features -> topography tensor (planes first).
std::vector<float> topo_input(const SegmentFeatures& f, const FeatureNormalizer& norm,
                              const topo::ElectrodeLayout& layout = topo::ElectrodeLayout::standard(),
                              const Mask& mask = {});

std::vector<Sample> make_samples(std::span<const SegmentFeatures> rows, const FeatureNormalizer& norm,
                                 const Mask& mask = {});

/// Rebuilds features for evaluation under a mask. Band masks re-filter the
/// segment to the kept band before the raw z-score.
SegmentFeatures extract_masked(const EegSegment& filtered, const FeatureOptions& options, const Mask& mask);

}  // namespace mdeeg::features
