#include "mdeeg/data.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "fft.hpp"
#include "mdeeg/rng.hpp"

namespace mdeeg {

const char* to_string(CognitiveLoad label) { return label == CognitiveLoad::High ? "High" : "Low"; }

CognitiveLoad binarize_paas(int score) {
  if (score < 1 || score > 9) {
    throw std::domain_error("Paas score must be in [1, 9], got " + std::to_string(score));
  }
  return score <= 5 ? CognitiveLoad::Low : CognitiveLoad::High;
}

EegRecording::EegRecording(std::string subject_id, double sample_rate, std::vector<std::vector<double>> channels,
                           std::vector<PaasScore> paas_scores, std::array<std::string, kNumChannels> channel_names)
    : subject_id_(std::move(subject_id)),
      sample_rate_(sample_rate),
      channel_names_(std::move(channel_names)),
      channels_(std::move(channels)),
      paas_scores_(std::move(paas_scores)) {
  if (!(sample_rate_ > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (channels_.size() != kNumChannels) {
    throw std::invalid_argument("recording needs exactly 4 channels, got " + std::to_string(channels_.size()));
  }
  for (const auto& ch : channels_) {
    if (ch.size() != channels_.front().size()) throw std::invalid_argument("channel lengths differ");
  }
  for (const auto& p : paas_scores_) {
    if (p.score < 1 || p.score > 9) throw std::invalid_argument("Paas score out of [1, 9]");
  }
}

EegRecording EegRecording::with_channels(std::vector<std::vector<double>> channels) const {
  return EegRecording(subject_id_, sample_rate_, std::move(channels), paas_scores_, channel_names_);
}

EegSegment::EegSegment(std::string subject_id, std::size_t window_index, double sample_rate, std::size_t num_samples,
                       std::vector<double> data, CognitiveLoad label)
    : subject_id_(std::move(subject_id)),
      window_index_(window_index),
      sample_rate_(sample_rate),
      num_samples_(num_samples),
      data_(std::move(data)),
      label_(label) {
  if (data_.size() != kNumChannels * num_samples_) {
    throw std::invalid_argument("segment data must hold 4 x num_samples values");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("segment contains non-finite samples");
  }
}

std::span<const double> EegSegment::channel(std::size_t c) const {
  if (c >= kNumChannels) throw std::out_of_range("channel index");
  return std::span<const double>(data_).subspan(c * num_samples_, num_samples_);
}

EegSegment EegSegment::with_data(std::vector<double> data) const {
  return EegSegment(subject_id_, window_index_, sample_rate_, num_samples_, std::move(data), label_);
}

SegmentationResult segment_recording(const EegRecording& rec, double window_s) {
  if (!(window_s > 0.0)) throw std::invalid_argument("window length must be positive");
  const auto window = static_cast<std::size_t>(std::llround(window_s * rec.sample_rate()));
  SegmentationResult result;
  if (window == 0) return result;

  std::map<std::size_t, int> scores;
  for (const auto& p : rec.paas_scores()) scores.emplace(p.window_index, p.score);

  const std::size_t n_windows = rec.num_samples() / window;
  for (std::size_t w = 0; w < n_windows; ++w) {
    auto it = scores.find(w);
    if (it == scores.end()) {
      ++result.missing_label_windows;
      continue;
    }
    std::vector<double> data;
    data.reserve(kNumChannels * window);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      auto ch = rec.channel(c).subspan(w * window, window);
      data.insert(data.end(), ch.begin(), ch.end());
    }
    result.segments.emplace_back(rec.subject_id(), w, rec.sample_rate(), window, std::move(data),
                                 binarize_paas(it->second));
  }
  return result;
}

std::vector<LosoSplit> loso_splits(std::vector<std::string> subjects) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) throw std::domain_error("LOSO needs at least 2 subjects");
  std::vector<LosoSplit> splits;
  splits.reserve(subjects.size());
  for (const auto& test : subjects) {
    LosoSplit split{test, {}};
    for (const auto& s : subjects) {
      if (s != test) split.train_subjects.push_back(s);
    }
    splits.push_back(std::move(split));
  }
  return splits;
}

std::vector<std::string> subjects_of(std::span<const EegSegment> segments) {
  std::set<std::string> ids;
  for (const auto& s : segments) ids.insert(s.subject_id());
  return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

struct SynthBand {
  double lo_hz;
  double hi_hz;
  double amplitude_uv;
  std::array<double, kNumChannels> spatial;  // TP9, AF7, AF8, TP10
};

// Theta is frontal-dominant and alpha temporal-dominant, so class effects
// differ across electrodes after noise is added.
constexpr std::array<SynthBand, 5> kSynthBands = {{
    {1.5, 3.5, 7.0, {1.0, 1.0, 1.0, 1.0}},
    {4.5, 7.5, 5.0, {0.6, 1.0, 1.0, 0.6}},
    {8.5, 11.5, 6.0, {1.0, 0.6, 0.6, 1.0}},
    {13.0, 30.0, 2.5, {1.0, 1.0, 1.0, 1.0}},
    {32.0, 55.0, 1.0, {1.0, 1.0, 1.0, 1.0}},
}};
constexpr std::size_t kTheta = 1;
constexpr std::size_t kAlpha = 2;

// Per-channel amplitude factors applied to High segments: frontal theta rises
// more than temporal theta, temporal alpha drops more than frontal alpha.
constexpr std::array<double, kNumChannels> kHighTheta = {1.5, 2.5, 2.5, 1.5};
constexpr std::array<double, kNumChannels> kHighAlpha = {0.35, 0.65, 0.65, 0.35};
constexpr std::size_t kComponentsPerBand = 3;
constexpr double kLineNoiseUv = 1.5;

struct SubjectProfile {
  std::array<double, kNumChannels> gain{};
  std::array<double, kNumChannels> phase_offset{};
  std::array<double, 5> band_scale{};
  double theta_peak = 6.0;
  double alpha_peak = 10.0;
};

SubjectProfile make_profile(Rng& rng) {
  std::uniform_real_distribution<double> gain(0.7, 1.4);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> scale(0.8, 1.25);
  SubjectProfile p;
  for (auto& g : p.gain) g = gain(rng);
  for (auto& ph : p.phase_offset) ph = phase(rng);
  for (auto& s : p.band_scale) s = scale(rng);
  p.theta_peak = std::uniform_real_distribution<double>(5.0, 7.0)(rng);
  p.alpha_peak = std::uniform_real_distribution<double>(9.5, 10.5)(rng);
  return p;
}

// Gaussian noise with a 1/f power spectrum, normalized to unit variance.
std::vector<double> pink_noise(std::size_t n, double sample_rate, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(n);
  for (double& v : white) v = normal(rng);
  auto spectrum = detail::rfft(white);
  const double df = sample_rate / static_cast<double>(n);
  spectrum[0] = 0.0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    spectrum[k] /= std::sqrt(std::max(static_cast<double>(k) * df, 0.5));
  }
  auto shaped = detail::irfft(spectrum, n);
  double mean = 0.0;
  for (double v : shaped) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : shaped) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  for (double& v : shaped) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return shaped;
}

}  // namespace

std::string synth_subject_id(std::size_t index) {
  std::string digits = std::to_string(index + 1);
  if (digits.size() < 2) digits.insert(digits.begin(), '0');
  return "S" + digits;
}

std::vector<EegSegment> synth_generate(std::size_t n_subjects, std::size_t segs_per_subject, std::uint64_t seed,
                                       const SynthOptions& options) {
  if (n_subjects < 1 || segs_per_subject < 1) throw std::invalid_argument("synth_generate: counts must be >= 1");
  const auto n = static_cast<std::size_t>(std::llround(options.window_s * options.sample_rate));
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<EegSegment> out;
  out.reserve(n_subjects * segs_per_subject);
  for (std::size_t s = 0; s < n_subjects; ++s) {
    Rng subject_rng(derive_seed(seed, {0x5b1ec7, s}));
    const SubjectProfile profile = make_profile(subject_rng);

    std::vector<CognitiveLoad> labels(segs_per_subject, CognitiveLoad::Low);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(segs_per_subject / 2),
              CognitiveLoad::High);
    std::shuffle(labels.begin(), labels.end(), subject_rng);

    for (std::size_t w = 0; w < segs_per_subject; ++w) {
      Rng rng(derive_seed(seed, {0x5e6, s, w}));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const bool high = labels[w] == CognitiveLoad::High;

      std::vector<double> data(kNumChannels * n, 0.0);
      for (std::size_t b = 0; b < kSynthBands.size(); ++b) {
        const SynthBand& band = kSynthBands[b];
        double amp = band.amplitude_uv * profile.band_scale[b] * (0.85 + 0.3 * unit(rng));
        for (std::size_t k = 0; k < kComponentsPerBand; ++k) {
          double f;
          if (b == kTheta) {
            f = std::clamp(profile.theta_peak + (unit(rng) - 0.5) * 1.5, band.lo_hz, band.hi_hz);
          } else if (b == kAlpha) {
            f = std::clamp(profile.alpha_peak + (unit(rng) - 0.5) * 1.5, band.lo_hz, band.hi_hz);
          } else {
            f = band.lo_hz + (band.hi_hz - band.lo_hz) * unit(rng);
          }
          const double phase = two_pi * unit(rng);
          const double comp_amp = amp / std::sqrt(static_cast<double>(kComponentsPerBand));
          for (std::size_t c = 0; c < kNumChannels; ++c) {
            double a = comp_amp * band.spatial[c] * profile.gain[c];
            if (high && b == kTheta) a *= kHighTheta[c];
            if (high && b == kAlpha) a *= kHighAlpha[c];
            const double ph = phase + 0.3 * profile.phase_offset[c];
            double* row = data.data() + c * n;
            for (std::size_t t = 0; t < n; ++t) {
              row[t] += a * std::sin(two_pi * f * static_cast<double>(t) / options.sample_rate + ph);
            }
          }
        }
      }
      const double line_phase = two_pi * unit(rng);
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        auto noise = pink_noise(n, options.sample_rate, rng);
        double* row = data.data() + c * n;
        for (std::size_t t = 0; t < n; ++t) {
          row[t] += profile.gain[c] * options.noise_std_uv * noise[t];
          row[t] += kLineNoiseUv * std::sin(two_pi * 60.0 * static_cast<double>(t) / options.sample_rate + line_phase);
        }
      }
      out.emplace_back(synth_subject_id(s), w, options.sample_rate, n, std::move(data), labels[w]);
    }
  }
  return out;
}

std::vector<EegRecording> recordings_from_segments(std::span<const EegSegment> segments) {
  std::map<std::string, std::vector<const EegSegment*>> by_subject;
  for (const auto& seg : segments) by_subject[seg.subject_id()].push_back(&seg);

  std::vector<EegRecording> recordings;
  for (auto& [subject, segs] : by_subject) {
    std::sort(segs.begin(), segs.end(),
              [](const EegSegment* a, const EegSegment* b) { return a->window_index() < b->window_index(); });
    std::vector<std::vector<double>> channels(kNumChannels);
    std::vector<PaasScore> scores;
    for (std::size_t w = 0; w < segs.size(); ++w) {
      const EegSegment& seg = *segs[w];
      if (seg.sample_rate() != segs.front()->sample_rate() || seg.num_samples() != segs.front()->num_samples()) {
        throw std::invalid_argument("recordings_from_segments: inconsistent segment geometry for " + subject);
      }
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        auto ch = seg.channel(c);
        channels[c].insert(channels[c].end(), ch.begin(), ch.end());
      }
      scores.push_back({w, seg.label() == CognitiveLoad::High ? 7 : 3});
    }
    recordings.emplace_back(subject, segs.front()->sample_rate(), std::move(channels), std::move(scores));
  }
  return recordings;
}

}  // namespace mdeeg
