#include "mdeeg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "mdeeg/rng.hpp"

namespace mdeeg::dsp {

std::complex<double> Biquad::response(std::complex<double> z) const {
  const std::complex<double> zi = 1.0 / z;
  const std::complex<double> zi2 = zi * zi;
  return (b0 + b1 * zi + b2 * zi2) / (1.0 + a1 * zi + a2 * zi2);
}

std::array<double, 2> Biquad::pole_magnitudes() const {
  // roots of z^2 + a1 z + a2
  const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2, 0.0));
  const std::complex<double> p1 = (-a1 + disc) / 2.0;
  const std::complex<double> p2 = (-a1 - disc) / 2.0;
  return {std::abs(p1), std::abs(p2)};
}

BiquadCascade::BiquadCascade(std::vector<Biquad> sections, double sample_rate)
    : sections_(std::move(sections)), sample_rate_(sample_rate) {
  if (!(sample_rate_ > 0.0)) throw std::invalid_argument("cascade sample rate must be positive");
  for (const auto& s : sections_) {
    for (double c : {s.b0, s.b1, s.b2, s.a1, s.a2}) {
      if (!std::isfinite(c)) throw std::invalid_argument("biquad coefficient is not finite");
    }
    for (double m : s.pole_magnitudes()) {
      if (!(m < 1.0)) throw std::invalid_argument("biquad section is unstable");
    }
  }
}

std::complex<double> BiquadCascade::response(double f_hz) const {
  const std::complex<double> z = std::polar(1.0, 2.0 * std::numbers::pi * f_hz / sample_rate_);
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) h *= s.response(z);
  return h;
}

std::vector<double> BiquadCascade::filter(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& s : sections_) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> BiquadCascade::filtfilt(std::span<const double> x) const {
  auto y = filter(x);
  std::reverse(y.begin(), y.end());
  y = filter(y);
  std::reverse(y.begin(), y.end());
  return y;
}

BiquadCascade design_bandpass(double low_hz, double high_hz, double fs) {
  if (!(fs > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs / 2.0)) {
    throw std::domain_error("bandpass edges must satisfy 0 < low < high < fs/2");
  }
  using cd = std::complex<double>;
  constexpr int kOrder = 2;
  const double fs2 = 2.0 * fs;
  const double w_lo = fs2 * std::tan(std::numbers::pi * low_hz / fs);
  const double w_hi = fs2 * std::tan(std::numbers::pi * high_hz / fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Analog Butterworth prototype poles, then lowpass -> bandpass.
  std::vector<cd> analog_poles;
  for (int k = 0; k < kOrder; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + kOrder + 1) / (2.0 * kOrder);
    const cd p = std::polar(1.0, theta);
    const cd pb = p * bw / 2.0;
    const cd root = std::sqrt(pb * pb - w0_sq);
    analog_poles.push_back(pb + root);
    analog_poles.push_back(pb - root);
  }
  // Bandpass gain bw^N with N zeros at s = 0 and N at infinity.
  double k_analog = std::pow(bw, kOrder);

  std::vector<cd> poles;
  cd denom = 1.0;
  for (const cd& p : analog_poles) {
    poles.push_back((fs2 + p) / (fs2 - p));
    denom *= (fs2 - p);
  }
  const cd numer = std::pow(cd(fs2), kOrder);
  const double k_digital = k_analog * std::real(numer / denom);

  // Pair each pole with its conjugate; each section gets zeros at z = +1 and z = -1.
  std::vector<cd> upper;
  for (const cd& p : poles) {
    if (p.imag() > 0.0) upper.push_back(p);
  }
  if (upper.size() != kOrder) throw std::runtime_error("bandpass design: unexpected real poles");
  std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) { return std::abs(a) < std::abs(b); });

  std::vector<Biquad> sections;
  for (std::size_t i = 0; i < upper.size(); ++i) {
    const double g = i == 0 ? k_digital : 1.0;
    sections.push_back({g, 0.0, -g, -2.0 * upper[i].real(), std::norm(upper[i])});
  }
  return BiquadCascade(std::move(sections), fs);
}

BiquadCascade design_notch(double f0_hz, double q, double fs) {
  if (!(fs > 0.0) || !(f0_hz > 0.0) || !(f0_hz < fs / 2.0) || !(q > 0.0)) {
    throw std::domain_error("notch requires 0 < f0 < fs/2 and q > 0");
  }
  const double w0 = 2.0 * std::numbers::pi * f0_hz / fs;
  const double bw = w0 / q;
  const double beta = std::tan(bw / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  const double c = std::cos(w0);
  Biquad s{gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0};
  return BiquadCascade({s}, fs);
}

namespace {

std::vector<double> run(const BiquadCascade& cascade, std::span<const double> x, FilterMode mode) {
  return mode == FilterMode::ZeroPhase ? cascade.filtfilt(x) : cascade.filter(x);
}

}  // namespace

EegSegment apply_filter(const BiquadCascade& cascade, const EegSegment& segment, FilterMode mode) {
  if (segment.sample_rate() != cascade.sample_rate()) {
    throw std::invalid_argument("segment sample rate does not match the filter");
  }
  std::vector<double> data;
  data.reserve(segment.data().size());
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    auto y = run(cascade, segment.channel(c), mode);
    data.insert(data.end(), y.begin(), y.end());
  }
  return segment.with_data(std::move(data));
}

EegRecording apply_filter(const BiquadCascade& cascade, const EegRecording& rec, FilterMode mode) {
  if (rec.sample_rate() != cascade.sample_rate()) {
    throw std::invalid_argument("recording sample rate does not match the filter");
  }
  std::vector<std::vector<double>> channels;
  for (std::size_t c = 0; c < kNumChannels; ++c) channels.push_back(run(cascade, rec.channel(c), mode));
  return rec.with_channels(std::move(channels));
}

Preprocessor::Preprocessor(double fs, FilterMode mode_)
    : bandpass(design_bandpass(1.0, 75.0, fs)), notch(design_notch(60.0, 30.0, fs)), mode(mode_) {}

EegRecording Preprocessor::operator()(const EegRecording& rec) const {
  return apply_filter(notch, apply_filter(bandpass, rec, mode), mode);
}

EegSegment Preprocessor::operator()(const EegSegment& seg) const {
  return apply_filter(notch, apply_filter(bandpass, seg, mode), mode);
}

ZscoreResult zscore(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("zscore needs at least 2 values");
  ZscoreResult r;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  const double var = ss / n;
  r.stddev = std::sqrt(var);
  if (var < kZscoreVarianceFloor) {
    r.degenerate = true;
    r.values.assign(values.size(), 0.0);
    return r;
  }
  r.values.reserve(values.size());
  for (double v : values) r.values.push_back((v - r.mean) / r.stddev);
  return r;
}

EegSegment add_noise(const EegSegment& segment, const NoiseSpec& spec) {
  if (!(spec.fraction >= 0.0)) throw std::invalid_argument("noise fraction must be >= 0");
  if (spec.fraction == 0.0) return segment;

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> data(segment.data().begin(), segment.data().end());
  const std::size_t n = segment.num_samples();
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    auto ch = segment.channel(c);
    double mean = 0.0;
    for (double v : ch) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : ch) ss += (v - mean) * (v - mean);
    const double sigma = spec.fraction * std::sqrt(ss / static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t) data[c * n + t] += sigma * normal(rng);
  }
  return segment.with_data(std::move(data));
}

}  // namespace mdeeg::dsp
