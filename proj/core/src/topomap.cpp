#include "mdeeg/topomap.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mdeeg::topo {

ElectrodeLayout ElectrodeLayout::standard() {
  // TP9, AF7, AF8, TP10 in storage order.
  return {{{{-0.95, -0.25}, {-0.55, 0.78}, {0.55, 0.78}, {0.95, -0.25}}}};
}

double ElectrodeLayout::grid_x(std::size_t col) {
  return -1.0 + 2.0 * static_cast<double>(col) / static_cast<double>(kGridSize - 1);
}

double ElectrodeLayout::grid_y(std::size_t row) {
  return 1.0 - 2.0 * static_cast<double>(row) / static_cast<double>(kGridSize - 1);
}

namespace {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

RbfInterpolator RbfInterpolator::fit(const ElectrodeLayout& layout, std::span<const double> values) {
  if (values.size() != kNumChannels) throw std::invalid_argument("fit_rbf: need 4 values");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::domain_error("fit_rbf: non-finite value");
  }
  RbfInterpolator rbf;
  rbf.nodes_ = layout.positions;

  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    for (std::size_t j = i + 1; j < kNumChannels; ++j) {
      const double d = distance(rbf.nodes_[i], rbf.nodes_[j]);
      if (d < 1e-9) throw std::domain_error("fit_rbf: coincident electrode positions");
      total += d;
      ++pairs;
    }
  }
  rbf.epsilon_ = total / pairs;

  Eigen::Matrix4d a;
  Eigen::Vector4d rhs;
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    rhs(static_cast<Eigen::Index>(i)) = values[i];
    for (std::size_t j = 0; j < kNumChannels; ++j) {
      const double r = distance(rbf.nodes_[i], rbf.nodes_[j]);
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::sqrt(r * r + rbf.epsilon_ * rbf.epsilon_);
    }
  }
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(a);
  if (!lu.isInvertible()) throw std::domain_error("fit_rbf: singular interpolation system");
  const Eigen::Vector4d w = lu.solve(rhs);
  for (std::size_t i = 0; i < kNumChannels; ++i) rbf.weights_[i] = w(static_cast<Eigen::Index>(i));
  return rbf;
}

double RbfInterpolator::operator()(double x, double y) const {
  double v = 0.0;
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    const double r = distance({x, y}, nodes_[i]);
    v += weights_[i] * std::sqrt(r * r + epsilon_ * epsilon_);
  }
  return v;
}

Field render_band(const RbfInterpolator& interp) {
  Field f{};
  for (std::size_t r = 0; r < kGridSize; ++r) {
    for (std::size_t c = 0; c < kGridSize; ++c) {
      f[r * kGridSize + c] = interp(ElectrodeLayout::grid_x(c), ElectrodeLayout::grid_y(r));
    }
  }
  return f;
}

Rgb jet(double v, double vmax) {
  const double t = (v + vmax) / (2.0 * vmax);
  auto channel = [](double x) { return std::clamp(1.5 - std::abs(x), 0.0, 1.0); };
  return {channel(4.0 * t - 3.0), channel(4.0 * t - 2.0), channel(4.0 * t - 1.0)};
}

double symmetric_vmax(const Field& field) {
  double m = 0.0;
  for (double v : field) m = std::max(m, std::abs(v));
  return m;
}

ColorField jet_colormap(const Field& field, double vmax) {
  ColorField out;
  out.rgb.resize(field.size() * kColorPlanes);
  out.degenerate = !(vmax > 0.0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Rgb c = out.degenerate ? jet(0.0, 1.0) : jet(field[i], vmax);
    out.rgb[3 * i] = c.r;
    out.rgb[3 * i + 1] = c.g;
    out.rgb[3 * i + 2] = c.b;
  }
  return out;
}

std::vector<float> MultiSpectralMap::to_chw() const {
  std::vector<float> chw(values.size());
  const std::size_t hw = kGridSize * kGridSize;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t ch = 0; ch < kMapPlanes; ++ch) chw[ch * hw + p] = values[p * kMapPlanes + ch];
  }
  return chw;
}

MultiSpectralMap build_map_from_values(const spectral::BandMatrix& values, const ElectrodeLayout& layout,
                                       bool center) {
  MultiSpectralMap map;
  for (std::size_t b = 0; b < spectral::kNumBands; ++b) {
    std::array<double, kNumChannels> v{};
    for (std::size_t c = 0; c < kNumChannels; ++c) v[c] = spectral::at(values, c, b);
    if (center) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(kNumChannels);
      for (double& x : v) x -= mean;
    }
    const Field field = render_band(RbfInterpolator::fit(layout, v));
    // Fields whose extent is pure round-off are treated as flat.
    double vmax = symmetric_vmax(field);
    if (vmax < 1e-12) vmax = 0.0;
    const ColorField colors = jet_colormap(field, vmax);
    for (std::size_t p = 0; p < kGridSize * kGridSize; ++p) {
      for (std::size_t k = 0; k < kColorPlanes; ++k) {
        map.values[p * kMapPlanes + b * kColorPlanes + k] = static_cast<float>(colors.rgb[p * kColorPlanes + k]);
      }
    }
  }
  return map;
}

MultiSpectralMap build_multispectral_map(const spectral::BandMatrix& band_powers, const ElectrodeLayout& layout,
                                         const MapOptions& options) {
  spectral::BandMatrix values = band_powers;
  if (options.log_power) {
    for (double& v : values) v = std::log10(std::max(v, kLogPowerFloor));
  }
  return build_map_from_values(values, layout, options.center);
}

std::string band_ppm(const MultiSpectralMap& map, std::size_t band) {
  if (band >= spectral::kNumBands) throw std::out_of_range("band index");
  std::string out = "P6\n" + std::to_string(kGridSize) + " " + std::to_string(kGridSize) + "\n255\n";
  for (std::size_t r = 0; r < kGridSize; ++r) {
    for (std::size_t c = 0; c < kGridSize; ++c) {
      for (std::size_t k = 0; k < kColorPlanes; ++k) {
        const float v = map.at(r, c, band * kColorPlanes + k);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
      }
    }
  }
  return out;
}

}  // namespace mdeeg::topo
