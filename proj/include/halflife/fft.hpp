#pragma once

// Real-input FFT cross-correlation on top of FFTW.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace halflife::fft {

inline size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

// Planning is not thread-safe in FFTW; execution with the new-array
// interface is, so plans are created once per size under a lock.
inline const Plans& plans(size_t len) {
  static std::mutex mu;
  static std::map<size_t, Plans> cache;
  std::lock_guard lock(mu);
  auto [it, fresh] = cache.try_emplace(len);
  if (fresh) {
    const int n = static_cast<int>(len);
    std::vector<double> real(len);
    std::vector<std::complex<double>> half(len / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(half.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    it->second.forward = fftw_plan_dft_r2c_1d(n, real.data(), c, flags);
    it->second.inverse = fftw_plan_dft_c2r_1d(n, c, real.data(), flags);
  }
  return it->second;
}

}  // namespace detail

/// Half spectrum (len / 2 + 1 bins) of x zero-padded to len.
inline std::vector<std::complex<double>> spectrum(std::span<const double> x, size_t len) {
  std::vector<double> padded(len, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  std::vector<std::complex<double>> f(len / 2 + 1);
  fftw_execute_dft_r2c(detail::plans(len).forward, padded.data(), reinterpret_cast<fftw_complex*>(f.data()));
  return f;
}

/// Linear cross-correlation from half spectra of padded length `len`:
/// r[w + m - 1] = sum_t x[t] * y[t - w] for w in [-(m-1), n-1].
inline std::vector<double> correlate_spectra(std::span<const std::complex<double>> fx,
                                             std::span<const std::complex<double>> fy, size_t n, size_t m) {
  const size_t len = 2 * (fx.size() - 1);
  std::vector<std::complex<double>> prod(fx.size());
  for (size_t i = 0; i < prod.size(); ++i) prod[i] = fx[i] * std::conj(fy[i]);
  std::vector<double> full(len);
  fftw_execute_dft_c2r(detail::plans(len).inverse, reinterpret_cast<fftw_complex*>(prod.data()), full.data());
  std::vector<double> r(n + m - 1);
  const long mm = static_cast<long>(m);
  for (long w = -(mm - 1); w < static_cast<long>(n); ++w) {
    const size_t idx = w >= 0 ? static_cast<size_t>(w) : len - static_cast<size_t>(-w);
    r[static_cast<size_t>(w + mm - 1)] = full[idx] / static_cast<double>(len);
  }
  return r;
}

/// Full linear cross-correlation r[w + m - 1] = sum_t x[t] * y[t - w] for
/// lags w in [-(m-1), n-1], where n = |x| and m = |y|.
inline std::vector<double> cross_correlate(std::span<const double> x, std::span<const double> y) {
  const size_t len = std::max<size_t>(2, next_pow2(x.size() + y.size() - 1));
  return correlate_spectra(spectrum(x, len), spectrum(y, len), x.size(), y.size());
}

}  // namespace halflife::fft
