#pragma once

#include <array>
#include <span>
#include <vector>

#include "mdeeg/data.hpp"
#include "mdeeg/spectral.hpp"

namespace mdeeg::topo {

inline constexpr std::size_t kGridSize = 32;
inline constexpr std::size_t kColorPlanes = 3;
inline constexpr std::size_t kMapPlanes = spectral::kNumBands * kColorPlanes;  // 15

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Electrode positions on the unit head disk (x right, y toward the nose) and
/// the 32x32 lattice over [-1, 1]^2. Row 0 is the top (y = +1), column 0 the left (x = -1).
struct ElectrodeLayout {
  std::array<Point, kNumChannels> positions;

  static ElectrodeLayout standard();
  static double grid_x(std::size_t col);
  static double grid_y(std::size_t row);
};

/// Multiquadric RBF interpolant phi(r) = sqrt(r^2 + eps^2) over the 4 electrodes,
/// eps = mean pairwise node distance.
class RbfInterpolator {
 public:
  /// Throws std::domain_error on coincident nodes or non-finite values.
  static RbfInterpolator fit(const ElectrodeLayout& layout, std::span<const double> values);

  double operator()(double x, double y) const;
  double epsilon() const { return epsilon_; }
  const std::array<double, kNumChannels>& weights() const { return weights_; }

 private:
  std::array<Point, kNumChannels> nodes_{};
  std::array<double, kNumChannels> weights_{};
  double epsilon_ = 0.0;
};

using Field = std::array<double, kGridSize * kGridSize>;  // row-major

Field render_band(const RbfInterpolator& interp);

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};

/// Jet color of v on the symmetric scale [-vmax, vmax].
Rgb jet(double v, double vmax);

struct ColorField {
  std::vector<double> rgb;  // kGridSize x kGridSize x 3, row-major, interleaved
  bool degenerate = false;  // vmax <= 0: every pixel is the mid-scale color
};

ColorField jet_colormap(const Field& field, double vmax);

/// max |v| over the field.
double symmetric_vmax(const Field& field);

/// 32 x 32 x 15 tensor in [0, 1], stored (row, col, plane) row-major; planes are band-major:
/// Delta RGB in planes 0-2, ..., Gamma RGB in planes 12-14.
struct MultiSpectralMap {
  std::vector<float> values = std::vector<float>(kGridSize * kGridSize * kMapPlanes, 0.0f);

  float at(std::size_t row, std::size_t col, std::size_t plane) const {
    return values[(row * kGridSize + col) * kMapPlanes + plane];
  }
  float& at(std::size_t row, std::size_t col, std::size_t plane) {
    return values[(row * kGridSize + col) * kMapPlanes + plane];
  }
  /// Planes-first copy (15 x 32 x 32) for the convolutional encoder.
  std::vector<float> to_chw() const;
};

struct MapOptions {
  bool log_power = true;  // log10 band powers before centering
  bool center = true;     // subtract each band's mean over the 4 channels
};

inline constexpr double kLogPowerFloor = 1e-12;

/// Builds the map from arbitrary per-channel band values (already transformed).
/// Each band is mean-centered over channels when options.center is set.
MultiSpectralMap build_map_from_values(const spectral::BandMatrix& values, const ElectrodeLayout& layout,
                                       bool center = true);

/// Band powers (uV^2) -> optional log10 -> centering -> RBF -> Jet, per band.
MultiSpectralMap build_multispectral_map(const spectral::BandMatrix& band_powers, const ElectrodeLayout& layout,
                                         const MapOptions& options = {});

/// Binary PPM (P6) of one band's RGB planes.
std::string band_ppm(const MultiSpectralMap& map, std::size_t band);

}  // namespace mdeeg::topo
