#pragma once

// Thin wrapper over FFTW's complex-to-complex transforms.
//
// Conventions used throughout the library:
//   forward:  X_k = sum_j x_j exp(-2 pi i j k / n)        (unnormalized)
//   inverse:  x_j = (1/n) sum_k X_k exp(+2 pi i j k / n)
// so inverse(forward(x)) == x. Plans are created once per (length, direction)
// under a mutex and executed through the new-array interface, which FFTW
// guarantees to be thread-safe.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fgps/error.hpp"

namespace fgps {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

namespace fft {
namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    // FFTW_ESTIMATE does not touch the buffers; FFTW_UNALIGNED lets the plan
    // run on std::vector storage of any alignment.
    std::vector<Complex> in(n), out(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) throw Error("fftw: failed to create plan of length " + std::to_string(n));
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline void execute(std::span<const Complex> in, std::span<Complex> out, int sign) {
  fftw_plan plan = PlanCache::instance().get(in.size(), sign);
  // fftw_execute_dft never writes to `in` for out-of-place plans.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace detail

inline ComplexVector forward(std::span<const Complex> x) {
  ComplexVector out(x.size());
  if (x.empty()) return out;
  detail::execute(x, out, FFTW_FORWARD);
  return out;
}

inline ComplexVector forward(std::span<const double> x) {
  ComplexVector in(x.begin(), x.end());
  return forward(std::span<const Complex>(in));
}

inline ComplexVector inverse(std::span<const Complex> spectrum) {
  ComplexVector out(spectrum.size());
  if (spectrum.empty()) return out;
  detail::execute(spectrum, out, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(spectrum.size());
  for (auto& v : out) v *= scale;
  return out;
}

// Largest |imag| relative to max(1, largest |real|).
inline double relative_imaginary_residue(std::span<const Complex> values) {
  double max_real = 0.0;
  double max_imag = 0.0;
  for (const auto& v : values) {
    max_real = std::max(max_real, std::abs(v.real()));
    max_imag = std::max(max_imag, std::abs(v.imag()));
  }
  return max_imag / std::max(1.0, max_real);
}

// Inverse transform of a Hermitian-symmetric spectrum. Throws if the
// imaginary residue exceeds `tolerance` (relative, see above).
inline std::vector<double> inverse_real(std::span<const Complex> spectrum, double tolerance = 1e-10) {
  const ComplexVector full = inverse(spectrum);
  const double residue = relative_imaginary_residue(full);
  if (!(residue <= tolerance)) {
    throw NumericalDegeneracy("inverse DFT is not real: relative imaginary residue " +
                              std::to_string(residue));
  }
  std::vector<double> out(full.size());
  std::transform(full.begin(), full.end(), out.begin(), [](const Complex& v) { return v.real(); });
  return out;
}

}  // namespace fft
}  // namespace fgps
