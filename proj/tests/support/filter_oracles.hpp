#pragma once

#include <cmath>
#include <numbers>

namespace oracle {

// Order-2 analog Butterworth bandpass magnitude evaluated at the bilinear
// prewarped frequency: |H|^2 = 1 / (1 + ((W^2 - W0^2) / (W * B))^4).
inline double butterworth_bandpass(double f, double lo, double hi, double fs) {
  constexpr double pi = std::numbers::pi;
  auto warp = [fs](double hz) { return 2.0 * fs * std::tan(pi * hz / fs); };
  const double w = warp(f), wl = warp(lo), wh = warp(hi);
  const double ratio = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 4));
}

// Analog notch (s^2 + W0^2) / (s^2 + B s + W0^2) mapped through s = (1 - z^-1)/(1 + z^-1),
// with the -3 dB digital bandwidth f0/q fixing B.
inline double notch(double f, double f0, double q, double fs) {
  constexpr double pi = std::numbers::pi;
  const double w = std::tan(pi * f / fs), w0 = std::tan(pi * f0 / fs);
  const double b = std::tan(pi * (f0 / q) / fs) * (1.0 + w0 * w0);
  const double num = std::abs(w0 * w0 - w * w);
  return num / std::hypot(w0 * w0 - w * w, b * w);
}

}  // namespace oracle
