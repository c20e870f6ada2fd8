#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sre/rng.hpp"

namespace sre {

// Dense NCHW tensor, row-major within each channel plane.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {
    if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
      throw std::invalid_argument("Tensor: negative dimension");
  }

  std::size_t size() const { return v.size(); }
  int plane_size() const { return h * w; }

  T* plane(int ni, int ci) {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
  }
  const T* plane(int ni, int ci) const {
    return v.data() + (static_cast<std::size_t>(ni) * c + ci) * plane_size();
  }

  T& at(int ni, int ci, int y, int x) { return plane(ni, ci)[y * w + x]; }
  T at(int ni, int ci, int y, int x) const { return plane(ni, ci)[y * w + x]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  void fill(T value) { std::fill(v.begin(), v.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

// Exact array quarter turns of every spatial plane; rot90(x, 4) == x bitwise.
// One turn maps out(y, x) = in(x, W-1-y).
template <typename T>
Tensor<T> rot90(const Tensor<T>& x, int quarter_turns) {
  int q = ((quarter_turns % 4) + 4) % 4;
  if (q == 0) return x;
  Tensor<T> cur = x;
  for (int t = 0; t < q; ++t) {
    Tensor<T> out(cur.n, cur.c, cur.w, cur.h);
    for (int ni = 0; ni < cur.n; ++ni) {
      for (int ci = 0; ci < cur.c; ++ci) {
        const T* src = cur.plane(ni, ci);
        T* dst = out.plane(ni, ci);
        const int sh = cur.h, sw = cur.w;
        for (int y = 0; y < sw; ++y)
          for (int x2 = 0; x2 < sh; ++x2) dst[y * sh + x2] = src[x2 * sw + (sw - 1 - y)];
      }
    }
    cur = std::move(out);
  }
  return cur;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  T m = T(0);
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

template <typename T>
bool all_finite(const Tensor<T>& a) {
  for (T x : a.v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <typename T>
Tensor<T> randn_tensor(int n, int c, int h, int w, Rng& rng, double stddev = 1.0) {
  Tensor<T> t(n, c, h, w);
  for (auto& x : t.v) x = static_cast<T>(rng.gaussian() * stddev);
  return t;
}

}  // namespace sre
