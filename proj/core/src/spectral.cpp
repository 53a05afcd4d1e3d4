#include "mdeeg/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fft.hpp"

namespace mdeeg::spectral {
namespace {

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

std::vector<double> frequency_grid(std::size_t nfft, double fs) {
  std::vector<double> f(nfft / 2 + 1);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(k) * fs / static_cast<double>(nfft);
  return f;
}

// Doubles every bin except DC and (for even n) Nyquist.
void fold_one_sided(std::vector<double>& p, std::size_t nfft) {
  const std::size_t last = (nfft % 2 == 0) ? p.size() - 1 : p.size();
  for (std::size_t k = 1; k < last; ++k) p[k] *= 2.0;
}

}  // namespace

PsdEstimate welch_psd(std::span<const double> samples, double fs, const WelchOptions& options) {
  if (!(fs > 0.0)) throw std::invalid_argument("welch_psd: fs must be positive");
  const auto nperseg = static_cast<std::size_t>(std::llround(options.window_s * fs));
  if (nperseg < 2 || samples.size() < nperseg) {
    throw std::domain_error("welch_psd: signal shorter than one window");
  }
  if (!(options.overlap >= 0.0 && options.overlap < 1.0)) throw std::invalid_argument("welch_psd: bad overlap");
  const auto noverlap = static_cast<std::size_t>(std::llround(options.overlap * static_cast<double>(nperseg)));
  const std::size_t step = nperseg - noverlap;

  const auto window = periodic_hann(nperseg);
  double wss = 0.0;
  for (double w : window) wss += w * w;
  const double scale = 1.0 / (fs * wss);

  PsdEstimate psd{frequency_grid(nperseg, fs), std::vector<double>(nperseg / 2 + 1, 0.0)};
  std::vector<double> buf(nperseg);
  std::size_t count = 0;
  for (std::size_t start = 0; start + nperseg <= samples.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nperseg; ++i) mean += samples[start + i];
    mean /= static_cast<double>(nperseg);
    for (std::size_t i = 0; i < nperseg; ++i) buf[i] = (samples[start + i] - mean) * window[i];
    const auto spec = detail::rfft(buf);
    for (std::size_t k = 0; k < spec.size(); ++k) psd.power[k] += std::norm(spec[k]) * scale;
    ++count;
  }
  for (double& p : psd.power) p /= static_cast<double>(count);
  fold_one_sided(psd.power, nperseg);
  return psd;
}

PsdEstimate periodogram(std::span<const double> samples, double fs) {
  if (!(fs > 0.0)) throw std::invalid_argument("periodogram: fs must be positive");
  if (samples.size() < 2) throw std::domain_error("periodogram: need at least 2 samples");
  const std::size_t n = samples.size();
  const auto spec = detail::rfft(samples);
  PsdEstimate psd{frequency_grid(n, fs), std::vector<double>(spec.size())};
  const double scale = 1.0 / (fs * static_cast<double>(n));
  for (std::size_t k = 0; k < spec.size(); ++k) psd.power[k] = std::norm(spec[k]) * scale;
  fold_one_sided(psd.power, n);
  return psd;
}

Integral simpson_integral(std::span<const double> freqs, std::span<const double> values, double lo, double hi) {
  if (freqs.size() != values.size()) throw std::invalid_argument("simpson_integral: size mismatch");
  if (!(lo < hi)) throw std::invalid_argument("simpson_integral: lo must be < hi");
  const double tol = freqs.size() > 1 ? 1e-9 * (freqs[1] - freqs[0]) : 0.0;
  std::size_t first = freqs.size(), last = 0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (freqs[i] >= lo - tol && freqs[i] <= hi + tol) {
      first = std::min(first, i);
      last = i;
    }
  }
  Integral out;
  if (first == freqs.size() || last == first) {
    out.trapezoid_fallback = true;
    return out;
  }
  const std::size_t points = last - first + 1;
  const double h = freqs[first + 1] - freqs[first];
  if (points < 3) {
    out.trapezoid_fallback = true;
    out.value = 0.5 * h * (values[first] + values[last]);
    return out;
  }
  const std::size_t intervals = points - 1;
  const std::size_t simpson_end = first + (intervals % 2 == 0 ? intervals : intervals - 1);
  double sum = 0.0;
  for (std::size_t i = first; i + 2 <= simpson_end; i += 2) {
    sum += values[i] + 4.0 * values[i + 1] + values[i + 2];
  }
  out.value = sum * h / 3.0;
  if (simpson_end != last) out.value += 0.5 * h * (values[simpson_end] + values[last]);
  return out;
}

Integral band_power_simpson(const PsdEstimate& psd, const FrequencyBand& band) {
  return simpson_integral(psd.freqs, psd.power, band.lo_hz, band.hi_hz);
}

DifferentialEntropy differential_entropy_from_power(double band_power) {
  DifferentialEntropy de;
  de.band_power = band_power;
  double p = band_power;
  if (!(p > kDePowerFloor)) {
    p = kDePowerFloor;
    de.clamped = true;
  }
  de.nats = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * p);
  return de;
}

DifferentialEntropy differential_entropy(std::span<const double> samples, double fs, const FrequencyBand& band) {
  const PsdEstimate psd = periodogram(samples, fs);
  const bool closed_right = band.id == Band::Gamma;
  double sum = 0.0;
  std::size_t bins = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f >= band.lo_hz && (f < band.hi_hz || (closed_right && f <= band.hi_hz))) {
      sum += psd.power[k];
      ++bins;
    }
  }
  return differential_entropy_from_power(bins ? sum / static_cast<double>(bins) : 0.0);
}

BandMatrix band_powers(const EegSegment& segment, const WelchOptions& options) {
  BandMatrix m{};
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const PsdEstimate psd = welch_psd(segment.channel(c), segment.sample_rate(), options);
    for (std::size_t b = 0; b < kNumBands; ++b) {
      at(m, c, b) = std::max(0.0, band_power_simpson(psd, kBands[b]).value);
    }
  }
  return m;
}

std::vector<double> psd_feature_vector(const EegSegment& segment) {
  const BandMatrix m = band_powers(segment);
  return {m.begin(), m.end()};
}

BandMatrix de_features(const EegSegment& segment) {
  BandMatrix m{};
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      at(m, c, b) = differential_entropy(segment.channel(c), segment.sample_rate(), kBands[b]).nats;
    }
  }
  return m;
}

}  // namespace mdeeg::spectral
