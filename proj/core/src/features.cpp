#include "mdeeg/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mdeeg/error.hpp"

namespace mdeeg::features {

std::string to_string(FeatureKind k) { return k == FeatureKind::Psd ? "psd" : "de"; }

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "psd") return FeatureKind::Psd;
  if (s == "de") return FeatureKind::De;
  throw std::invalid_argument("unknown feature kind '" + s + "' (expected psd or de)");
}

PreparedSegments prepare_segments(std::span<const EegRecording> recordings, dsp::FilterMode mode) {
  PreparedSegments out;
  for (const auto& rec : recordings) {
    const dsp::Preprocessor pre(rec.sample_rate(), mode);
    SegmentationResult seg = segment_recording(pre(rec));
    out.missing_label_windows += seg.missing_label_windows;
    for (auto& s : seg.segments) out.segments.push_back(std::move(s));
  }
  return out;
}

namespace {

std::vector<float> zscored_raw(const EegSegment& seg) {
  const std::size_t n = seg.num_samples();
  std::vector<float> raw(kNumChannels * n);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto z = dsp::zscore(seg.channel(c));
    std::transform(z.values.begin(), z.values.end(), raw.begin() + static_cast<std::ptrdiff_t>(c * n),
                   [](double v) { return static_cast<float>(v); });
  }
  return raw;
}

spectral::BandMatrix band_values(const EegSegment& seg, const FeatureOptions& options) {
  if (options.kind == FeatureKind::De) return spectral::de_features(seg);
  spectral::BandMatrix p = spectral::band_powers(seg);
  if (options.log_power) {
    for (double& v : p) v = std::log10(std::max(v, topo::kLogPowerFloor));
  }
  return p;
}

}  // namespace

SegmentFeatures extract_features(const EegSegment& filtered, const FeatureOptions& options) {
  SegmentFeatures f;
  f.subject = filtered.subject_id();
  f.window_index = filtered.window_index();
  f.label = static_cast<int>(filtered.label());
  f.num_samples = filtered.num_samples();
  f.raw = zscored_raw(filtered);
  f.values = band_values(filtered, options);
  return f;
}

std::vector<SegmentFeatures> extract_all(std::span<const EegSegment> filtered, const FeatureOptions& options) {
  std::vector<SegmentFeatures> out;
  out.reserve(filtered.size());
  for (const auto& s : filtered) out.push_back(extract_features(s, options));
  return out;
}

SegmentFeatures extract_masked(const EegSegment& filtered, const FeatureOptions& options, const Mask& mask) {
  SegmentFeatures f = extract_features(filtered, options);
  if (mask.keep_band) {
    const auto& band = spectral::band_info(*mask.keep_band);
    const auto bp = dsp::design_bandpass(band.lo_hz, band.hi_hz, filtered.sample_rate());
    f.raw = zscored_raw(dsp::apply_filter(bp, filtered));
  }
  return f;
}

// ---------------------------------------------------------------------------

FeatureNormalizer FeatureNormalizer::fit(std::span<const SegmentFeatures> rows, std::span<const std::string> subjects) {
  const std::set<std::string> allowed(subjects.begin(), subjects.end());
  FeatureNormalizer norm;
  std::array<double, kDims> sum{}, sumsq{};
  std::set<std::string> seen;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!allowed.contains(r.subject)) continue;
    seen.insert(r.subject);
    ++n;
    for (std::size_t d = 0; d < kDims; ++d) sum[d] += r.values[d];
  }
  if (n == 0) throw std::domain_error("feature normalizer: no rows from the requested subjects");
  for (std::size_t d = 0; d < kDims; ++d) norm.mean_[d] = sum[d] / static_cast<double>(n);
  for (const auto& r : rows) {
    if (!allowed.contains(r.subject)) continue;
    for (std::size_t d = 0; d < kDims; ++d) {
      const double dv = r.values[d] - norm.mean_[d];
      sumsq[d] += dv * dv;
    }
  }
  for (std::size_t d = 0; d < kDims; ++d) norm.std_[d] = std::sqrt(sumsq[d] / static_cast<double>(n));
  norm.subjects_.assign(seen.begin(), seen.end());
  return norm;
}

spectral::BandMatrix FeatureNormalizer::apply(const spectral::BandMatrix& values) const {
  spectral::BandMatrix out{};
  for (std::size_t d = 0; d < kDims; ++d) {
    const bool degenerate = std_[d] * std_[d] < dsp::kZscoreVarianceFloor;
    out[d] = degenerate ? 0.0 : (values[d] - mean_[d]) / std_[d];
  }
  return out;
}

bool FeatureNormalizer::was_fitted_on(const std::string& subject) const {
  return std::find(subjects_.begin(), subjects_.end(), subject) != subjects_.end();
}

void FeatureNormalizer::assert_excludes(const std::string& subject) const {
  if (was_fitted_on(subject)) {
    throw std::logic_error("normalization statistics include held-out subject " + subject);
  }
}

void FeatureNormalizer::save(const std::filesystem::path& file) const {
  std::ofstream os(file);
  if (!os) throw DataError("cannot write " + file.string());
  os << "subjects";
  for (const auto& s : subjects_) os << ' ' << s;
  os << '\n' << std::setprecision(17);
  for (std::size_t d = 0; d < kDims; ++d) os << mean_[d] << '\t' << std_[d] << '\n';
  if (!os) throw DataError("failed writing " + file.string());
}

FeatureNormalizer FeatureNormalizer::load(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw DataError("cannot open " + file.string());
  FeatureNormalizer norm;
  std::string line;
  if (!std::getline(is, line) || line.rfind("subjects", 0) != 0) throw DataError(file.string() + ": missing subjects line");
  std::istringstream ss(line.substr(8));
  for (std::string s; ss >> s;) norm.subjects_.push_back(s);
  for (std::size_t d = 0; d < kDims; ++d) {
    if (!std::getline(is, line)) throw DataError(file.string() + ": expected " + std::to_string(kDims) + " rows");
    std::istringstream ls(line);
    if (!(ls >> norm.mean_[d] >> norm.std_[d]) || !std::isfinite(norm.mean_[d]) || !(norm.std_[d] >= 0.0)) {
      throw DataError(file.string() + ": bad row '" + line + "'");
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------

std::vector<float> topo_input(const SegmentFeatures& f, const FeatureNormalizer& norm,
                              const topo::ElectrodeLayout& layout, const Mask& mask) {
  spectral::BandMatrix z = norm.apply(f.values);
  if (mask.keep_channel) {
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      if (c == *mask.keep_channel) continue;
      for (std::size_t b = 0; b < spectral::kNumBands; ++b) spectral::at(z, c, b) = 0.0;
    }
  }
  std::vector<float> chw = topo::build_map_from_values(z, layout, true).to_chw();
  if (mask.keep_band) {
    constexpr std::size_t plane = topo::kGridSize * topo::kGridSize;
    const std::size_t kept = static_cast<std::size_t>(*mask.keep_band);
    for (std::size_t b = 0; b < spectral::kNumBands; ++b) {
      if (b == kept) continue;
      std::fill_n(chw.begin() + static_cast<std::ptrdiff_t>(b * topo::kColorPlanes * plane),
                  topo::kColorPlanes * plane, 0.0f);
    }
  }
  return chw;
}

std::vector<Sample> make_samples(std::span<const SegmentFeatures> rows, const FeatureNormalizer& norm,
                                 const Mask& mask) {
  if (mask.keep_channel && *mask.keep_channel >= kNumChannels) {
    throw std::invalid_argument("mask: channel index out of range");
  }
  const auto layout = topo::ElectrodeLayout::standard();
  std::vector<Sample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    Sample s;
    s.subject = r.subject;
    s.window_index = r.window_index;
    s.label = r.label;
    s.num_samples = r.num_samples;
    s.raw = r.raw;
    if (mask.keep_channel) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        if (c == *mask.keep_channel) continue;
        std::fill_n(s.raw.begin() + static_cast<std::ptrdiff_t>(c * r.num_samples), r.num_samples, 0.0f);
      }
    }
    s.topo = topo_input(r, norm, layout, mask);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mdeeg::features
