#pragma once

// Test-side oracles, independent of the library's compute paths.

#include <cmath>
#include <functional>
#include <vector>

#include "sre/ring.hpp"
#include "sre/tensor.hpp"

namespace sre::testutil {

// Naive stride-1 "same" cross-correlation over an explicit dense kernel bank
// (cout x cin x k x k). The reference the fast conv paths are checked against.
template <typename T>
Tensor<T> naive_conv(const Tensor<T>& x, const std::vector<T>& bank,
                     const std::vector<T>& bias, int cout, int k) {
  const int p = (k - 1) / 2;
  Tensor<T> out(x.n, cout, x.h, x.w);
  for (int n = 0; n < x.n; ++n)
    for (int oc = 0; oc < cout; ++oc)
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx) {
          double acc = static_cast<double>(bias[oc]);
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = y + ky - p, sx = xx + kx - p;
                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                const double w =
                    bank[((static_cast<std::size_t>(oc) * x.c + ic) * k + ky) * k + kx];
                acc += w * static_cast<double>(x.at(n, ic, sy, sx));
              }
          out.at(n, oc, y, xx) = static_cast<T>(acc);
        }
  return out;
}

// Central finite differences with step 1e-5; returns the worst relative error
// against the analytic gradient.
inline double fd_check(std::vector<double>& values, const std::vector<double>& analytic,
                       const std::function<double()>& loss, double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + step;
    const double lp = loss();
    values[i] = keep - step;
    const double lm = loss();
    values[i] = keep;
    const double numeric = (lp - lm) / (2.0 * step);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, rel);
  }
  return worst;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

}  // namespace sre::testutil
