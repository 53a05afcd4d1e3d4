#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "mdeeg/data.hpp"

namespace mdeeg::dsp {

/// Direct-form-II-transposed second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z) const;
  /// Pole magnitudes of 1 + a1 z^-1 + a2 z^-2.
  std::array<double, 2> pole_magnitudes() const;
};

/// An immutable cascade of biquads. Construction rejects non-finite
/// coefficients and any pole on or outside the unit circle.
class BiquadCascade {
 public:
  BiquadCascade(std::vector<Biquad> sections, double sample_rate);

  const std::vector<Biquad>& sections() const { return sections_; }
  double sample_rate() const { return sample_rate_; }

  /// Complex response at frequency f (Hz), product over sections.
  std::complex<double> response(double f_hz) const;
  double magnitude(double f_hz) const { return std::abs(response(f_hz)); }

  /// Causal filtering from zero initial state.
  std::vector<double> filter(std::span<const double> x) const;
  /// Forward then time-reversed pass (zero phase, squared magnitude).
  std::vector<double> filtfilt(std::span<const double> x) const;

 private:
  std::vector<Biquad> sections_;
  double sample_rate_;
};

/// Order-2 Butterworth bandpass (two biquads) via bilinear transform with prewarped edges.
BiquadCascade design_bandpass(double low_hz, double high_hz, double fs);

/// Single-biquad notch with -3 dB bandwidth f0/q.
BiquadCascade design_notch(double f0_hz, double q, double fs);

enum class FilterMode { Causal, ZeroPhase };

/// Filters every channel independently; output length equals input length.
EegSegment apply_filter(const BiquadCascade& cascade, const EegSegment& segment,
                        FilterMode mode = FilterMode::Causal);
EegRecording apply_filter(const BiquadCascade& cascade, const EegRecording& rec,
                          FilterMode mode = FilterMode::Causal);

/// 1-75 Hz bandpass followed by the 60 Hz Q=30 notch.
struct Preprocessor {
  explicit Preprocessor(double fs, FilterMode mode = FilterMode::Causal);

  BiquadCascade bandpass;
  BiquadCascade notch;
  FilterMode mode;

  EegRecording operator()(const EegRecording& rec) const;
  EegSegment operator()(const EegSegment& seg) const;
};

inline constexpr double kZscoreVarianceFloor = 1e-12;

struct ZscoreResult {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;
  bool degenerate = false;  // variance below kZscoreVarianceFloor; values are all zero
};

/// Population z-score (divide by N).
ZscoreResult zscore(std::span<const double> values);

struct NoiseSpec {
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Adds N(0, (fraction * channel std)^2) noise to each channel of the segment.
/// fraction == 0 returns an identical copy.
EegSegment add_noise(const EegSegment& segment, const NoiseSpec& spec);

}  // namespace mdeeg::dsp
