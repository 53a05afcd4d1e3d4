#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "filter_oracles.hpp"
#include "mdeeg/dsp.hpp"

using namespace mdeeg;
using namespace mdeeg::dsp;

namespace {

constexpr double kFs = 256.0;
constexpr double kPi = std::numbers::pi;

std::vector<double> sine(double f, double seconds, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(static_cast<std::size_t>(seconds * kFs));
  for (std::size_t t = 0; t < x.size(); ++t) x[t] = amp * std::sin(2.0 * kPi * f * static_cast<double>(t) / kFs + phase);
  return x;
}

// Amplitude of the f-Hz component over samples [from, end), by projection.
double measured_gain(const std::vector<double>& y, double f, std::size_t from) {
  double s = 0.0, c = 0.0;
  for (std::size_t t = from; t < y.size(); ++t) {
    const double ph = 2.0 * kPi * f * static_cast<double>(t) / kFs;
    s += y[t] * std::sin(ph);
    c += y[t] * std::cos(ph);
  }
  return 2.0 * std::hypot(s, c) / static_cast<double>(y.size() - from);
}

double rms(const std::vector<double>& y, std::size_t from) {
  double ss = 0.0;
  for (std::size_t t = from; t < y.size(); ++t) ss += y[t] * y[t];
  return std::sqrt(ss / static_cast<double>(y.size() - from));
}

EegSegment random_segment(std::uint64_t seed, std::size_t n = 2560) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(kNumChannels * n);
  for (double& x : v) x = d(rng);
  return EegSegment("S", 0, kFs, n, std::move(v), CognitiveLoad::Low);
}

}  // namespace

TEST(Bandpass, MatchesAnalogButterworthOracle) {
  const auto bp = design_bandpass(1.0, 75.0, kFs);
  EXPECT_EQ(bp.sections().size(), 2u);
  for (double f : {0.3, 1.0, 2.0, 8.66, 20.0, 50.0, 75.0, 100.0, 120.0}) {
    EXPECT_NEAR(bp.magnitude(f), oracle::butterworth_bandpass(f, 1.0, 75.0, kFs), 1e-9) << f;
  }
}

TEST(Bandpass, KillsDcAndPassesCenter) {
  const auto bp = design_bandpass(1.0, 75.0, kFs);
  EXPECT_LT(bp.magnitude(0.0), 1e-3);
  EXPECT_LT(std::abs(20.0 * std::log10(bp.magnitude(std::sqrt(75.0)))), 1.0);
  EXPECT_LT(bp.magnitude(120.0), bp.magnitude(75.0));
}

TEST(Bandpass, InvalidEdgesThrow) {
  EXPECT_THROW(design_bandpass(0.0, 75.0, kFs), std::domain_error);
  EXPECT_THROW(design_bandpass(10.0, 5.0, kFs), std::domain_error);
  EXPECT_THROW(design_bandpass(1.0, 128.0, kFs), std::domain_error);
}

TEST(Notch, MatchesAnalogNotchOracle) {
  const auto n = design_notch(60.0, 30.0, kFs);
  for (double f : {0.0, 10.0, 55.0, 59.0, 60.0, 61.0, 65.0, 100.0}) {
    EXPECT_NEAR(n.magnitude(f), oracle::notch(f, 60.0, 30.0, kFs), 1e-9) << f;
  }
}

TEST(Notch, GainTargets) {
  const auto n = design_notch(60.0, 30.0, kFs);
  EXPECT_LT(n.magnitude(60.0), 0.01);
  EXPECT_GT(n.magnitude(10.0), 0.99);
  EXPECT_NEAR(n.magnitude(0.0), 1.0, 1e-6);
  for (double f = 0.0; f < 128.0; f += 0.25) {
    if (std::abs(f - 60.0) > 60.0 / 30.0 * 2.0) {
      EXPECT_GT(n.magnitude(f), 0.9) << f;
    }
  }
  EXPECT_THROW(design_notch(60.0, 0.0, kFs), std::domain_error);
  EXPECT_THROW(design_notch(200.0, 30.0, kFs), std::domain_error);
}

TEST(Cascade, DesignedPolesAreInsideUnitCircle) {
  for (const auto& c : {design_bandpass(1.0, 75.0, kFs), design_notch(60.0, 30.0, kFs),
                        design_bandpass(4.0, 8.0, kFs), design_bandpass(31.0, 75.0, kFs)}) {
    for (const auto& s : c.sections()) {
      for (double m : s.pole_magnitudes()) EXPECT_LT(m, 1.0);
    }
  }
}

TEST(Cascade, RejectsUnstableOrNonFiniteSections) {
  EXPECT_THROW(BiquadCascade({Biquad{1, 0, 0, 0, 1.0}}, kFs), std::invalid_argument);
  EXPECT_THROW(BiquadCascade({Biquad{1, 0, 0, -2.5, 1.2}}, kFs), std::invalid_argument);
  EXPECT_THROW(BiquadCascade({Biquad{NAN, 0, 0, 0, 0}}, kFs), std::invalid_argument);
}

TEST(Cascade, SteadyStateGainMatchesTransferFunction) {
  const Preprocessor pre(kFs);
  for (double f : {5.0, 30.0, 60.0, 70.0}) {
    const auto x = sine(f, 20.0);
    const auto y = pre.notch.filter(pre.bandpass.filter(x));
    const double expected = pre.bandpass.magnitude(f) * pre.notch.magnitude(f);
    EXPECT_NEAR(measured_gain(y, f, 5 * 256), expected, 0.02) << f;
  }
}

TEST(Cascade, NotchRemovesMainsInSteadyState) {
  const auto n = design_notch(60.0, 30.0, kFs);
  EXPECT_LT(rms(n.filter(sine(60.0, 10.0)), 256), 0.02);
}

TEST(Cascade, LinearAndTimeInvariant) {
  const auto bp = design_bandpass(1.0, 75.0, kFs);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  std::vector<double> a(1000), b(1000), mix(1000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = d(rng);
    b[i] = d(rng);
    mix[i] = 2.5 * a[i] - 0.75 * b[i];
  }
  const auto ya = bp.filter(a), yb = bp.filter(b), ym = bp.filter(mix);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(ym[i], 2.5 * ya[i] - 0.75 * yb[i], 1e-9);

  // Delaying the input by k zero samples delays the output by k.
  std::vector<double> delayed(a.size() + 7, 0.0);
  std::copy(a.begin(), a.end(), delayed.begin() + 7);
  const auto yd = bp.filter(delayed);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(yd[i + 7], ya[i], 1e-12);
}

TEST(Cascade, ZeroPhaseHasSquaredMagnitudeAndNoLag) {
  const auto bp = design_bandpass(1.0, 75.0, kFs);
  const auto x = sine(10.0, 20.0);
  const auto y = bp.filtfilt(x);
  ASSERT_EQ(y.size(), x.size());
  const double m = bp.magnitude(10.0);
  EXPECT_NEAR(measured_gain(y, 10.0, 5 * 256), m * m, 0.01);
  // No phase shift: the output stays in phase with the input mid-signal.
  double s = 0.0, c = 0.0;
  for (std::size_t t = 5 * 256; t < 15 * 256; ++t) {
    const double ph = 2.0 * kPi * 10.0 * static_cast<double>(t) / kFs;
    s += y[t] * std::sin(ph);
    c += y[t] * std::cos(ph);
  }
  EXPECT_LT(std::abs(std::atan2(c, s)), 0.01);
}

TEST(ApplyFilter, ZeroInZeroOutAndScaling) {
  const Preprocessor pre(kFs);
  EegSegment zero("S", 0, kFs, 2560, std::vector<double>(4 * 2560, 0.0), CognitiveLoad::High);
  const auto filtered_zero = pre(zero);
  for (double v : filtered_zero.data()) EXPECT_EQ(v, 0.0);

  const auto seg = random_segment(2);
  std::vector<double> scaled(seg.data().begin(), seg.data().end());
  for (double& v : scaled) v *= 3.0;
  const auto y1 = pre(seg), y3 = pre(seg.with_data(scaled));
  for (std::size_t i = 0; i < y1.data().size(); ++i) {
    EXPECT_NEAR(y3.data()[i], 3.0 * y1.data()[i], 1e-6 * std::max(1.0, std::abs(y3.data()[i])));
  }
  EXPECT_EQ(y1.data().size(), seg.data().size());
  EXPECT_EQ(y1.label(), seg.label());
}

TEST(ApplyFilter, ChannelsAreIndependent) {
  const auto bp = design_bandpass(1.0, 75.0, kFs);
  auto seg = random_segment(3);
  std::vector<double> d(seg.data().begin(), seg.data().end());
  std::fill(d.begin() + 2560, d.begin() + 2 * 2560, 0.0);
  const auto y = apply_filter(bp, seg.with_data(d));
  const auto ref = bp.filter(seg.channel(0));
  for (std::size_t t = 0; t < 2560; ++t) {
    EXPECT_EQ(y.channel(0)[t], ref[t]);
    EXPECT_EQ(y.channel(1)[t], 0.0);
  }
  EegSegment other_rate("S", 0, 128.0, 2560, d, CognitiveLoad::Low);
  EXPECT_THROW(apply_filter(bp, other_rate), std::invalid_argument);
}

TEST(Zscore, PopulationStatistics) {
  const auto r = zscore(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_NEAR(r.values[0], -1.224744871391589, 1e-12);
  EXPECT_NEAR(r.values[1], 0.0, 1e-12);
  EXPECT_NEAR(r.values[2], 1.224744871391589, 1e-12);
  EXPECT_FALSE(r.degenerate);

  const auto c = zscore(std::vector<double>(5, 4.2));
  EXPECT_TRUE(c.degenerate);
  for (double v : c.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(zscore(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Zscore, OutputHasZeroMeanUnitStd) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> len(2, 300);
    std::normal_distribution<double> d(std::uniform_real_distribution<double>(-50, 50)(rng),
                                       std::uniform_real_distribution<double>(0.1, 20)(rng));
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = d(rng);
    const auto r = zscore(v);
    double m = 0.0, ss = 0.0;
    for (double x : r.values) m += x;
    m /= static_cast<double>(v.size());
    for (double x : r.values) ss += (x - m) * (x - m);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(ss / static_cast<double>(v.size())), 1.0, 1e-9);
  }
}

TEST(Noise, ZeroFractionIsIdentity) {
  const auto seg = random_segment(5);
  EXPECT_EQ(add_noise(seg, {0.0, 1}), seg);
}

TEST(Noise, StdScalesWithChannelStd) {
  const auto seg = random_segment(6);
  std::vector<double> d(seg.data().begin(), seg.data().end());
  for (std::size_t t = 0; t < 2560; ++t) d[2560 + t] *= 4.0;  // channel 1 has std ~4
  const auto base = seg.with_data(d);
  const auto noisy = add_noise(base, {0.5, 77});
  for (std::size_t c = 0; c < 2; ++c) {
    const auto ch = base.channel(c);
    double m = 0.0, ss = 0.0;
    for (double v : ch) m += v;
    m /= 2560.0;
    for (double v : ch) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / 2560.0);
    double nm = 0.0, nss = 0.0;
    for (std::size_t t = 0; t < 2560; ++t) nm += noisy.channel(c)[t] - ch[t];
    nm /= 2560.0;
    for (std::size_t t = 0; t < 2560; ++t) {
      const double e = noisy.channel(c)[t] - ch[t] - nm;
      nss += e * e;
    }
    EXPECT_NEAR(std::sqrt(nss / 2560.0), 0.5 * sd, 0.05 * 0.5 * sd) << c;
  }
  EXPECT_EQ(add_noise(base, {0.5, 77}), noisy);
  EXPECT_NE(add_noise(base, {0.5, 78}), noisy);
}
