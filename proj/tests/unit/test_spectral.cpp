#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "mdeeg/spectral.hpp"

using namespace mdeeg;
using namespace mdeeg::spectral;

namespace {

constexpr double kFs = 256.0;
constexpr double kPi = std::numbers::pi;

std::vector<double> tone(double f, double amp = 1.0, std::size_t n = 2560) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = amp * std::sin(2.0 * kPi * f * static_cast<double>(t) / kFs);
  return x;
}

std::vector<double> white(std::uint64_t seed, std::size_t n = 2560, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

// Welch by direct DFT: periodic Hann, per-segment mean removal, one-sided
// doubling except DC and Nyquist, density scaling 1 / (fs * sum w^2).
std::vector<double> welch_oracle(const std::vector<double>& x, std::size_t nper, std::size_t step) {
  std::vector<double> w(nper);
  double wss = 0.0;
  for (std::size_t i = 0; i < nper; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(nper));
    wss += w[i] * w[i];
  }
  std::vector<double> p(nper / 2 + 1, 0.0);
  std::size_t count = 0;
  for (std::size_t s = 0; s + nper <= x.size(); s += step, ++count) {
    double mean = 0.0;
    for (std::size_t i = 0; i < nper; ++i) mean += x[s + i];
    mean /= static_cast<double>(nper);
    for (std::size_t k = 0; k < p.size(); ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < nper; ++i) {
        acc += (x[s + i] - mean) * w[i] * std::polar(1.0, -2.0 * kPi * double(k * i % nper) / double(nper));
      }
      const double fold = (k == 0 || 2 * k == nper) ? 1.0 : 2.0;
      p[k] += fold * std::norm(acc) / (kFs * wss);
    }
  }
  for (double& v : p) v /= static_cast<double>(count);
  return p;
}

double total_band_power(const PsdEstimate& psd) {
  double s = 0.0;
  for (const auto& b : kBands) s += band_power_simpson(psd, b).value;
  return s;
}

std::size_t dominant_band(const PsdEstimate& psd) {
  std::size_t best = 0;
  for (std::size_t b = 1; b < kNumBands; ++b) {
    if (band_power_simpson(psd, kBands[b]).value > band_power_simpson(psd, kBands[best]).value) best = b;
  }
  return best;
}

EegSegment segment_of(const std::vector<double>& ch) {
  std::vector<double> d;
  for (std::size_t c = 0; c < kNumChannels; ++c) d.insert(d.end(), ch.begin(), ch.end());
  return EegSegment("S", 0, kFs, ch.size(), std::move(d), CognitiveLoad::Low);
}

}  // namespace

TEST(Welch, MatchesDirectDftOracle) {
  const auto x = white(3, 1280);
  const auto psd = welch_psd(x, kFs);
  const auto ref = welch_oracle(x, 512, 256);
  ASSERT_EQ(psd.power.size(), ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(psd.power[k], ref[k], 1e-9 * std::max(1.0, ref[k])) << k;
  EXPECT_DOUBLE_EQ(psd.resolution(), 0.5);
  EXPECT_DOUBLE_EQ(psd.freqs.front(), 0.0);
  EXPECT_DOUBLE_EQ(psd.freqs.back(), 128.0);
}

TEST(Welch, ToneSitsInItsBin) {
  const auto psd = welch_psd(tone(10.0), kFs);
  const auto peak = std::max_element(psd.power.begin(), psd.power.end()) - psd.power.begin();
  EXPECT_NEAR(psd.freqs[static_cast<std::size_t>(peak)], 10.0, 0.5);
}

TEST(Welch, WhiteNoiseParseval) {
  double mean_integral = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto psd = welch_psd(white(seed), kFs);
    double integral = 0.0;
    for (double p : psd.power) integral += p * psd.resolution();
    mean_integral += integral / 100.0;
  }
  EXPECT_NEAR(mean_integral, 1.0, 0.1);
}

TEST(Welch, ZeroSignalAndShortInput) {
  for (double p : welch_psd(std::vector<double>(600, 0.0), kFs).power) EXPECT_EQ(p, 0.0);
  EXPECT_THROW(welch_psd(std::vector<double>(511, 1.0), kFs), std::domain_error);
}

TEST(Welch, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(512, 3000)(rng);
    for (double p : welch_psd(white(rng(), n, 5.0), kFs).power) EXPECT_GE(p, 0.0);
  }
}

TEST(Simpson, ConstantOverTheta) {
  PsdEstimate psd;
  for (int k = 0; k <= 256; ++k) {
    psd.freqs.push_back(0.5 * k);
    psd.power.push_back(2.0);
  }
  EXPECT_NEAR(band_power_simpson(psd, band_info(Band::Theta)).value, 8.0, 1e-12);
}

TEST(Simpson, ExactOnQuadratics) {
  std::vector<double> f, v;
  for (int k = 0; k <= 8; ++k) {
    f.push_back(0.25 * k);
    v.push_back(f.back() * f.back());
  }
  const auto r = simpson_integral(f, v, 0.0, 2.0);
  EXPECT_NEAR(r.value, 8.0 / 3.0, 1e-9);
  EXPECT_FALSE(r.trapezoid_fallback);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng), b = coef(rng), c = coef(rng);
    std::vector<double> vals;
    for (double x : f) vals.push_back(a * x * x + b * x + c);
    const double exact = a * 8.0 / 3.0 + b * 2.0 + c * 2.0;
    EXPECT_NEAR(simpson_integral(f, vals, 0.0, 2.0).value, exact, 1e-9);
  }
}

TEST(Simpson, OddIntervalCountEndsWithTrapezoid) {
  const std::vector<double> f = {0, 1, 2, 3};
  const std::vector<double> v = {1, 3, 2, 6};
  const double expected = (1 + 4 * 3 + 2) / 3.0 + 0.5 * (2 + 6);
  EXPECT_NEAR(simpson_integral(f, v, 0.0, 3.0).value, expected, 1e-12);
}

TEST(Simpson, FallsBackBelowThreePoints) {
  const std::vector<double> f = {0, 1, 2, 3};
  const std::vector<double> v = {1, 3, 2, 6};
  const auto r = simpson_integral(f, v, 0.9, 2.1);
  EXPECT_TRUE(r.trapezoid_fallback);
  EXPECT_NEAR(r.value, 0.5 * (3 + 2), 1e-12);
}

TEST(Bands, PartitionTheAnalysisRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto psd = welch_psd(white(seed, 2560, 3.0), kFs);
    const double whole = simpson_integral(psd.freqs, psd.power, 1.0, 75.0).value;
    EXPECT_LE(total_band_power(psd), whole * (1.0 + 1e-6));
  }
  for (std::size_t b = 0; b + 1 < kNumBands; ++b) EXPECT_EQ(kBands[b].hi_hz, kBands[b + 1].lo_hz);
}

TEST(Bands, AlphaToneDominates) {
  const auto psd = welch_psd(tone(10.0), kFs);
  EXPECT_GT(band_power_simpson(psd, band_info(Band::Alpha)).value / total_band_power(psd), 0.9);
}

TEST(Bands, HalvingTheWindowKeepsTheDominantBand) {
  for (double f : {2.5, 6.0, 10.0, 20.0, 50.0}) {
    const auto x = tone(f);
    EXPECT_EQ(dominant_band(welch_psd(x, kFs, {2.0, 0.5})), dominant_band(welch_psd(x, kFs, {1.0, 0.5}))) << f;
  }
}

TEST(Features, AlphaToneDominatesEveryChannel) {
  const auto v = psd_feature_vector(segment_of(tone(10.0, 5.0)));
  ASSERT_EQ(v.size(), 20u);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (std::size_t b = 0; b < kNumBands; ++b) {
      if (b != 2) {
        EXPECT_GT(v[c * kNumBands + 2], v[c * kNumBands + b]);
      }
    }
  }
}

TEST(Features, ZeroSegmentGivesZeroVector) {
  for (double v : psd_feature_vector(segment_of(std::vector<double>(2560, 0.0)))) EXPECT_EQ(v, 0.0);
}

TEST(DifferentialEntropy, ClosedForms) {
  EXPECT_NEAR(differential_entropy_from_power(1.0 / (2.0 * kPi * std::numbers::e)).nats, 0.0, 1e-12);
  const auto floor = differential_entropy_from_power(0.0);
  EXPECT_TRUE(floor.clamped);
  EXPECT_NEAR(floor.nats, 0.5 * std::log(2.0 * kPi * std::numbers::e * 1e-12), 1e-12);
  EXPECT_FALSE(differential_entropy_from_power(1.0).clamped);
}

TEST(DifferentialEntropy, DoublingAmplitudeAddsLn2) {
  const auto x = white(5);
  std::vector<double> x2(x);
  for (double& v : x2) v *= 2.0;
  for (const auto& b : kBands) {
    const double d1 = differential_entropy(x, kFs, b).nats, d2 = differential_entropy(x2, kFs, b).nats;
    EXPECT_NEAR(d2 - d1, std::log(2.0), 1e-3) << b.name;
  }
}

TEST(DifferentialEntropy, BandMeanOfPeriodogram) {
  // Oracle: mean periodogram density over bins [8, 12) Hz of a 10 s signal.
  const auto x = white(8);
  const std::size_t n = x.size();
  double sum = 0.0;
  int bins = 0;
  for (std::size_t k = 80; k < 120; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * kPi * double(k * t % n) / double(n));
    sum += 2.0 * std::norm(acc) / (kFs * static_cast<double>(n));
    ++bins;
  }
  const double expected = 0.5 * std::log(2.0 * kPi * std::numbers::e * sum / bins);
  EXPECT_NEAR(differential_entropy(x, kFs, band_info(Band::Alpha)).nats, expected, 1e-9);
}
