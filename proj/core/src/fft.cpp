#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace mdeeg::detail {
namespace {

// FFTW's planner is not reentrant; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  if (!plan) throw std::runtime_error("fftw: failed to plan r2c transform");
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan.get());
  std::vector<std::complex<double>> result(n / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out.get()[k][0], out.get()[k][1]};
  return result;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum size must be n/2+1");
  std::unique_ptr<fftw_complex, FftwFree> in(fftw_alloc_complex(n / 2 + 1));
  std::unique_ptr<double, FftwFree> out(fftw_alloc_real(n));
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  }
  if (!plan) throw std::runtime_error("fftw: failed to plan c2r transform");
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    in.get()[k][0] = spectrum[k].real();
    in.get()[k][1] = spectrum[k].imag();
  }
  fftw_execute(plan.get());
  std::vector<double> result(out.get(), out.get() + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : result) v *= scale;
  return result;
}

}  // namespace mdeeg::detail
