#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "mdeeg/data.hpp"

namespace mdeeg::spectral {

enum class Band : std::size_t { Delta = 0, Theta, Alpha, Beta, Gamma };
inline constexpr std::size_t kNumBands = 5;

struct FrequencyBand {
  Band id;
  std::string_view name;
  double lo_hz;
  double hi_hz;
};

inline constexpr std::array<FrequencyBand, kNumBands> kBands = {{
    {Band::Delta, "Delta", 1.0, 4.0},
    {Band::Theta, "Theta", 4.0, 8.0},
    {Band::Alpha, "Alpha", 8.0, 12.0},
    {Band::Beta, "Beta", 12.0, 31.0},
    {Band::Gamma, "Gamma", 31.0, 75.0},
}};

constexpr const FrequencyBand& band_info(Band b) { return kBands[static_cast<std::size_t>(b)]; }

/// One-sided density spectrum on a uniform grid 0..fs/2.
struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<double> power;

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

struct WelchOptions {
  double window_s = 2.0;
  double overlap = 0.5;
};

/// Welch estimate: periodic Hann windows, mean-detrended segments, averaged
/// one-sided periodograms scaled as a density (integral ~ variance).
/// Throws std::domain_error if the input is shorter than one window.
PsdEstimate welch_psd(std::span<const double> samples, double fs, const WelchOptions& options = {});

struct Integral {
  double value = 0.0;
  bool trapezoid_fallback = false;  // fewer than 3 grid points in range
};

/// Composite Simpson over the grid points inside [lo, hi]. When the slice has an
/// odd interval count the last interval is integrated by the trapezoid rule.
Integral simpson_integral(std::span<const double> freqs, std::span<const double> values, double lo, double hi);

Integral band_power_simpson(const PsdEstimate& psd, const FrequencyBand& band);

/// Whole-segment one-sided periodogram (rectangular window, density scaled).
PsdEstimate periodogram(std::span<const double> samples, double fs);

inline constexpr double kDePowerFloor = 1e-12;

struct DifferentialEntropy {
  double nats = 0.0;
  double band_power = 0.0;
  bool clamped = false;
};

/// 0.5 * ln(2 pi e P), where P is the mean periodogram density over the band's
/// bins [lo, hi) ([lo, hi] for Gamma). P is floored at kDePowerFloor.
DifferentialEntropy differential_entropy_from_power(double band_power);
DifferentialEntropy differential_entropy(std::span<const double> samples, double fs, const FrequencyBand& band);

/// 4 channels x 5 bands, row-major (channel-major flattening).
using BandMatrix = std::array<double, kNumChannels * kNumBands>;

inline double& at(BandMatrix& m, std::size_t channel, std::size_t band) { return m[channel * kNumBands + band]; }
inline double at(const BandMatrix& m, std::size_t channel, std::size_t band) {
  return m[channel * kNumBands + band];
}

/// Absolute band powers (uV^2) per channel and band.
BandMatrix band_powers(const EegSegment& segment, const WelchOptions& options = {});

/// 20-dim PSD feature vector, channel-major, before any normalization.
std::vector<double> psd_feature_vector(const EegSegment& segment);

/// Differential entropy per channel and band.
BandMatrix de_features(const EegSegment& segment);

}  // namespace mdeeg::spectral
