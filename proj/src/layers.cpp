#include "sre/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace sre {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRow = Eigen::Map<RowMat<T>>;
template <typename T>
using MapRowC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapStrided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MapStridedC = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Zero-pad one channel plane into a (h+2p) x (w+2p) buffer.
template <typename T>
void pad_plane(const T* src, int h, int w, int p, T* dst) {
  const int wp = w + 2 * p;
  std::fill(dst, dst + static_cast<std::size_t>(h + 2 * p) * wp, T(0));
  for (int y = 0; y < h; ++y)
    std::memcpy(dst + static_cast<std::size_t>(y + p) * wp + p, src + static_cast<std::size_t>(y) * w,
                sizeof(T) * w);
}

// Accumulation tile: rows per block sized so the output planes plus the ring
// sums stay cache resident while the (ic, ring) loop sweeps over them.
int ring_tile_rows(int h, int w, int cout, int bands) {
  const int budget_elems = 131072;  // ~512 KB of f32
  int rows = budget_elems / std::max(1, (cout + bands) * w);
  return std::clamp(rows, 1, h);
}

int im2col_tile_rows(int h, int w, int cin, int k, std::size_t elem_size) {
  const std::size_t budget = 8u << 20;
  std::size_t rows = budget / (static_cast<std::size_t>(cin) * k * k * w * elem_size);
  return static_cast<int>(std::clamp<std::size_t>(rows, 1, static_cast<std::size_t>(h)));
}

// Ring sums for output rows [y0, y1): rs[r] holds, for every output pixel in
// the tile, the sum of padded input values over ring r. Orbits are summed as
// (v0 + v2) + (v1 + v3) in a fixed orbit order, which makes the result
// bitwise equivariant to quarter turns of the input.
template <typename T>
void build_ring_sums(const T* pad, int w, int wp, int p, const RingMap& map,
                     int y0, int y1, std::vector<T>& rs) {
  const int tile = (y1 - y0) * w;
  rs.assign(static_cast<std::size_t>(map.bands) * tile, T(0));

  // ring 0 is the center pixel itself
  for (int y = y0; y < y1; ++y) {
    const T* src = pad + static_cast<std::size_t>(y + p) * wp + p;
    std::memcpy(rs.data() + static_cast<std::size_t>(y - y0) * w, src, sizeof(T) * w);
  }

  const int k = map.k;
  for (int r = 1; r < map.bands; ++r) {
    T* dst_ring = rs.data() + static_cast<std::size_t>(r) * tile;
    for (const RingOrbit& orbit : map.orbits[r]) {
      const int dy0 = orbit.cell[0] / k, dx0 = orbit.cell[0] % k;
      const int dy1 = orbit.cell[1] / k, dx1 = orbit.cell[1] % k;
      const int dy2 = orbit.cell[2] / k, dx2 = orbit.cell[2] % k;
      const int dy3 = orbit.cell[3] / k, dx3 = orbit.cell[3] % k;
      for (int y = y0; y < y1; ++y) {
        const T* a = pad + static_cast<std::size_t>(y + dy0) * wp + dx0;
        const T* b = pad + static_cast<std::size_t>(y + dy1) * wp + dx1;
        const T* c = pad + static_cast<std::size_t>(y + dy2) * wp + dx2;
        const T* d = pad + static_cast<std::size_t>(y + dy3) * wp + dx3;
        T* dst = dst_ring + static_cast<std::size_t>(y - y0) * w;
        for (int x = 0; x < w; ++x) dst[x] += (a[x] + c[x]) + (b[x] + d[x]);
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(ConvKind kind, int cin, int cout, int k)
    : kind_(kind), cin_(cin), cout_(cout), k_(k) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("Conv2d: kernel size must be odd");
  if (cin < 1 || cout < 1) throw std::invalid_argument("Conv2d: channel counts must be positive");
  map_ = ring_index_map(k);
  const std::size_t per = static_cast<std::size_t>(weights_per_filter());
  weights.assign(per * cin * cout, T(0));
  bias.assign(cout, T(0));
  wgrad.assign(weights.size(), T(0));
  bgrad.assign(bias.size(), T(0));
}

template <typename T>
int Conv2d<T>::weights_per_filter() const {
  return kind_ == ConvKind::kSre ? map_.bands : k_ * k_;
}

template <typename T>
void Conv2d<T>::init_params(Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(cin_) * k_ * k_);
  for (auto& v : weights) v = static_cast<T>(rng.gaussian() * stddev);
  std::fill(bias.begin(), bias.end(), T(0));
}

template <typename T>
void Conv2d<T>::forward_sre(const Tensor<T>& x, Tensor<T>& out, const T* scale,
                            int cin, int cout) const {
  const int h = x.h, w = x.w, p = same_pad(k_);
  const int wp = w + 2 * p;
  const int tile_rows = ring_tile_rows(h, w, cout, map_.bands);

  std::vector<T> pad(static_cast<std::size_t>(cin) * (h + 2 * p) * wp);
  std::vector<T> rs;
  const std::size_t pad_plane_elems = static_cast<std::size_t>(h + 2 * p) * wp;

  for (int n = 0; n < x.n; ++n) {
    for (int ic = 0; ic < cin; ++ic)
      pad_plane(x.plane(n, ic), h, w, p, pad.data() + pad_plane_elems * ic);

    for (int y0 = 0; y0 < h; y0 += tile_rows) {
      const int y1 = std::min(h, y0 + tile_rows);
      const int tile = (y1 - y0) * w;
      for (int ic = 0; ic < cin; ++ic) {
        build_ring_sums(pad.data() + pad_plane_elems * ic, w, wp, p, map_, y0, y1, rs);
        for (int oc = 0; oc < cout; ++oc) {
          T* dst = out.plane(n, oc) + static_cast<std::size_t>(y0) * w;
          const T* sc = scale + (static_cast<std::size_t>(oc) * cin + ic) * map_.bands;
          for (int r = 0; r < map_.bands; ++r) {
            const T s = sc[r];
            const T* src = rs.data() + static_cast<std::size_t>(r) * tile;
            for (int e = 0; e < tile; ++e) dst[e] += s * src[e];
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::forward_standard(const Tensor<T>& x, Tensor<T>& out) {
  const int h = x.h, w = x.w, p = same_pad(k_);
  const int wp = w + 2 * p;
  const int kk = k_ * k_;
  const int krows = cin_ * kk;
  const int tile_rows = im2col_tile_rows(h, w, cin_, k_, sizeof(T));

  std::vector<T> pad(static_cast<std::size_t>(cin_) * (h + 2 * p) * wp);
  std::vector<T> cols(static_cast<std::size_t>(krows) * tile_rows * w);
  const std::size_t pad_plane_elems = static_cast<std::size_t>(h + 2 * p) * wp;

  MapRowC<T> wm(weights.data(), cout_, krows);
  for (int n = 0; n < x.n; ++n) {
    for (int ic = 0; ic < cin_; ++ic)
      pad_plane(x.plane(n, ic), h, w, p, pad.data() + pad_plane_elems * ic);

    for (int y0 = 0; y0 < h; y0 += tile_rows) {
      const int y1 = std::min(h, y0 + tile_rows);
      const int tile = (y1 - y0) * w;
      for (int ic = 0; ic < cin_; ++ic) {
        const T* padc = pad.data() + pad_plane_elems * ic;
        for (int ky = 0; ky < k_; ++ky)
          for (int kx = 0; kx < k_; ++kx) {
            T* dst = cols.data() + (static_cast<std::size_t>(ic) * kk + ky * k_ + kx) * tile;
            for (int y = y0; y < y1; ++y)
              std::memcpy(dst + static_cast<std::size_t>(y - y0) * w,
                          padc + static_cast<std::size_t>(y + ky) * wp + kx, sizeof(T) * w);
          }
      }
      MapRowC<T> colm(cols.data(), krows, tile);
      MapStrided<T> outm(out.plane(n, 0) + static_cast<std::size_t>(y0) * w, cout_, tile,
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(h) * w));
      outm.noalias() += wm * colm;
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool want_grad) {
  if (x.c != cin_) throw std::invalid_argument("Conv2d: input channel mismatch");
  Tensor<T> out(x.n, cout_, x.h, x.w);
  for (int n = 0; n < x.n; ++n)
    for (int oc = 0; oc < cout_; ++oc)
      std::fill_n(out.plane(n, oc), out.plane_size(), bias[oc]);

  if (kind_ == ConvKind::kSre) {
    // scale[oc][ic][r] = w / cardinality: the dense kernel value on ring r
    std::vector<T> scale(weights.size());
    for (std::size_t f = 0; f < weights.size() / map_.bands; ++f)
      for (int r = 0; r < map_.bands; ++r)
        scale[f * map_.bands + r] =
            weights[f * map_.bands + r] / static_cast<T>(map_.cardinality[r]);
    forward_sre(x, out, scale.data(), cin_, cout_);
  } else {
    forward_standard(x, out);
  }

  if (want_grad) {
    saved_x_ = x;
    have_cache_ = true;
  }
  return out;
}

template <typename T>
void Conv2d<T>::backward_standard(const Tensor<T>& dy, Tensor<T>& dx) {
  const Tensor<T>& x = saved_x_;
  const int h = x.h, w = x.w, p = same_pad(k_);
  const int wp = w + 2 * p;
  const int kk = k_ * k_;
  const int krows = cin_ * kk;
  const int tile_rows = im2col_tile_rows(h, w, cin_, k_, sizeof(T));

  std::vector<T> pad(static_cast<std::size_t>(cin_) * (h + 2 * p) * wp);
  std::vector<T> dxpad(pad.size());
  std::vector<T> cols(static_cast<std::size_t>(krows) * tile_rows * w);
  std::vector<T> gcols(cols.size());
  const std::size_t pad_plane_elems = static_cast<std::size_t>(h + 2 * p) * wp;

  MapRowC<T> wm(weights.data(), cout_, krows);
  MapRow<T> wgm(wgrad.data(), cout_, krows);

  for (int n = 0; n < x.n; ++n) {
    for (int ic = 0; ic < cin_; ++ic)
      pad_plane(x.plane(n, ic), h, w, p, pad.data() + pad_plane_elems * ic);
    std::fill(dxpad.begin(), dxpad.end(), T(0));

    for (int y0 = 0; y0 < h; y0 += tile_rows) {
      const int y1 = std::min(h, y0 + tile_rows);
      const int tile = (y1 - y0) * w;
      for (int ic = 0; ic < cin_; ++ic) {
        const T* padc = pad.data() + pad_plane_elems * ic;
        for (int ky = 0; ky < k_; ++ky)
          for (int kx = 0; kx < k_; ++kx) {
            T* dst = cols.data() + (static_cast<std::size_t>(ic) * kk + ky * k_ + kx) * tile;
            for (int y = y0; y < y1; ++y)
              std::memcpy(dst + static_cast<std::size_t>(y - y0) * w,
                          padc + static_cast<std::size_t>(y + ky) * wp + kx, sizeof(T) * w);
          }
      }
      MapRowC<T> colm(cols.data(), krows, tile);
      MapStridedC<T> dym(dy.plane(n, 0) + static_cast<std::size_t>(y0) * w, cout_, tile,
                         Eigen::OuterStride<>(static_cast<Eigen::Index>(h) * w));
      wgm.noalias() += dym * colm.transpose();

      MapRow<T> gm(gcols.data(), krows, tile);
      gm.noalias() = wm.transpose() * dym;
      // col2im scatter-add into the padded input gradient
      for (int ic = 0; ic < cin_; ++ic) {
        T* ddst = dxpad.data() + pad_plane_elems * ic;
        for (int ky = 0; ky < k_; ++ky)
          for (int kx = 0; kx < k_; ++kx) {
            const T* src = gcols.data() + (static_cast<std::size_t>(ic) * kk + ky * k_ + kx) * tile;
            for (int y = y0; y < y1; ++y) {
              T* drow = ddst + static_cast<std::size_t>(y + ky) * wp + kx;
              const T* srow = src + static_cast<std::size_t>(y - y0) * w;
              for (int xcol = 0; xcol < w; ++xcol) drow[xcol] += srow[xcol];
            }
          }
      }
    }
    for (int ic = 0; ic < cin_; ++ic) {
      const T* src = dxpad.data() + pad_plane_elems * ic;
      T* dst = dx.plane(n, ic);
      for (int y = 0; y < h; ++y)
        std::memcpy(dst + static_cast<std::size_t>(y) * w,
                    src + static_cast<std::size_t>(y + p) * wp + p, sizeof(T) * w);
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  if (!have_cache_) throw std::logic_error("Conv2d::backward without cached forward");
  const Tensor<T>& x = saved_x_;
  if (dy.n != x.n || dy.c != cout_ || dy.h != x.h || dy.w != x.w)
    throw std::invalid_argument("Conv2d::backward: gradient shape mismatch");

  for (int n = 0; n < dy.n; ++n)
    for (int oc = 0; oc < cout_; ++oc) {
      const T* g = dy.plane(n, oc);
      T acc = T(0);
      for (int e = 0; e < dy.plane_size(); ++e) acc += g[e];
      bgrad[oc] += acc;
    }

  Tensor<T> dx(x.n, cin_, x.h, x.w);

  if (kind_ == ConvKind::kSre) {
    const int h = x.h, w = x.w, p = same_pad(k_);
    const int wp = w + 2 * p;
    const std::size_t pad_plane_elems = static_cast<std::size_t>(h + 2 * p) * wp;

    // weight gradient: dw[oc,ic,r] = <dy[oc], ring_sum_r(x[ic])> / card[r]
    std::vector<T> pad(pad_plane_elems);
    std::vector<T> rs;
    for (int n = 0; n < x.n; ++n)
      for (int ic = 0; ic < cin_; ++ic) {
        pad_plane(x.plane(n, ic), h, w, p, pad.data());
        build_ring_sums(pad.data(), w, wp, p, map_, 0, h, rs);
        for (int oc = 0; oc < cout_; ++oc) {
          const T* g = dy.plane(n, oc);
          T* wg = wgrad.data() + (static_cast<std::size_t>(oc) * cin_ + ic) * map_.bands;
          for (int r = 0; r < map_.bands; ++r) {
            const T* src = rs.data() + static_cast<std::size_t>(r) * h * w;
            T acc = T(0);
            for (int e = 0; e < h * w; ++e) acc += g[e] * src[e];
            wg[r] += acc / static_cast<T>(map_.cardinality[r]);
          }
        }
      }

    // input gradient: the SRE kernel equals its own 180-degree flip, so the
    // data gradient is the same ring convolution with channels transposed.
    std::vector<T> scale_t(weights.size());
    for (int oc = 0; oc < cout_; ++oc)
      for (int ic = 0; ic < cin_; ++ic)
        for (int r = 0; r < map_.bands; ++r)
          scale_t[(static_cast<std::size_t>(ic) * cout_ + oc) * map_.bands + r] =
              weights[(static_cast<std::size_t>(oc) * cin_ + ic) * map_.bands + r] /
              static_cast<T>(map_.cardinality[r]);
    forward_sre(dy, dx, scale_t.data(), cout_, cin_);
  } else {
    backward_standard(dy, dx);
  }

  have_cache_ = false;
  saved_x_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// AvgPool2
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> AvgPool2<T>::forward(const Tensor<T>& x, bool want_grad) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    throw std::invalid_argument("AvgPool2: spatial dims must be even");
  Tensor<T> out(x.n, x.c, x.h / 2, x.w / 2);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < out.h; ++y)
        for (int xo = 0; xo < out.w; ++xo) {
          const T a = src[(2 * y) * x.w + 2 * xo];
          const T b = src[(2 * y) * x.w + 2 * xo + 1];
          const T c2 = src[(2 * y + 1) * x.w + 2 * xo];
          const T d = src[(2 * y + 1) * x.w + 2 * xo + 1];
          // diagonal pairs first: bitwise stable under quarter turns
          dst[y * out.w + xo] = ((a + d) + (b + c2)) * T(0.25);
        }
    }
  if (want_grad) {
    n_ = x.n;
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
  }
  return out;
}

template <typename T>
Tensor<T> AvgPool2<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(n_, c_, h_, w_);
  for (int n = 0; n < n_; ++n)
    for (int c = 0; c < c_; ++c) {
      const T* g = dy.plane(n, c);
      T* dst = dx.plane(n, c);
      for (int y = 0; y < dy.h; ++y)
        for (int xo = 0; xo < dy.w; ++xo) {
          const T v = g[y * dy.w + xo] * T(0.25);
          dst[(2 * y) * w_ + 2 * xo] = v;
          dst[(2 * y) * w_ + 2 * xo + 1] = v;
          dst[(2 * y + 1) * w_ + 2 * xo] = v;
          dst[(2 * y + 1) * w_ + 2 * xo + 1] = v;
        }
    }
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, bool want_grad) {
  Tensor<T> out(x.n, x.c, 1, 1);
  const int hw = x.plane_size();
  scratch_.resize(hw);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T* src = x.plane(n, c);
      std::copy(src, src + hw, scratch_.begin());
      std::sort(scratch_.begin(), scratch_.end());
      T acc = T(0);
      for (int e = 0; e < hw; ++e) acc += scratch_[e];
      out.at(n, c, 0, 0) = acc / static_cast<T>(hw);
    }
  if (want_grad) {
    n_ = x.n;
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
  }
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dx(n_, c_, h_, w_);
  const T inv = T(1) / static_cast<T>(h_ * w_);
  for (int n = 0; n < n_; ++n)
    for (int c = 0; c < c_; ++c) {
      const T v = dy.at(n, c, 0, 0) * inv;
      std::fill_n(dx.plane(n, c), h_ * w_, v);
    }
  return dx;
}

// ---------------------------------------------------------------------------
// ChannelNorm
// ---------------------------------------------------------------------------

template <typename T>
ChannelNorm<T>::ChannelNorm(int channels) : c_(channels) {
  if (channels < 1) throw std::invalid_argument("ChannelNorm: channels must be positive");
  gamma.assign(channels, T(1));
  beta.assign(channels, T(0));
  running_mean.assign(channels, T(0));
  running_var.assign(channels, T(1));
  ggrad.assign(channels, T(0));
  bgrad.assign(channels, T(0));
}

template <typename T>
Tensor<T> ChannelNorm<T>::forward(const Tensor<T>& x, bool train, bool want_grad) {
  if (x.c != c_) throw std::invalid_argument("ChannelNorm: channel mismatch");
  Tensor<T> out(x.n, x.c, x.h, x.w);
  const int hw = x.plane_size();
  const std::size_t m = static_cast<std::size_t>(x.n) * hw;

  if (!train) {
    for (int c = 0; c < c_; ++c) {
      const double a = static_cast<double>(gamma[c]) /
                       std::sqrt(static_cast<double>(running_var[c]) + eps);
      const double b = static_cast<double>(beta[c]) - static_cast<double>(running_mean[c]) * a;
      const T at = static_cast<T>(a), bt = static_cast<T>(b);
      for (int n = 0; n < x.n; ++n) {
        const T* src = x.plane(n, c);
        T* dst = out.plane(n, c);
        for (int e = 0; e < hw; ++e) dst[e] = at * src[e] + bt;
      }
    }
    have_cache_ = false;
    return out;
  }

  if (m < 2) throw std::invalid_argument("ChannelNorm: train mode needs N*H*W >= 2");

  if (want_grad) {
    xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
    invstd_.assign(c_, 0.0);
  }
  for (int c = 0; c < c_; ++c) {
    double sum = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const T* src = x.plane(n, c);
      for (int e = 0; e < hw; ++e) sum += static_cast<double>(src[e]);
    }
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const T* src = x.plane(n, c);
      for (int e = 0; e < hw; ++e) {
        const double d = static_cast<double>(src[e]) - mean;
        ss += d * d;
      }
    }
    const double var = ss / static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + eps);
    const double g = static_cast<double>(gamma[c]), b = static_cast<double>(beta[c]);
    for (int n = 0; n < x.n; ++n) {
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      T* xh = want_grad ? xhat_.plane(n, c) : nullptr;
      for (int e = 0; e < hw; ++e) {
        const double h = (static_cast<double>(src[e]) - mean) * inv;
        if (xh) xh[e] = static_cast<T>(h);
        dst[e] = static_cast<T>(g * h + b);
      }
    }
    running_mean[c] = static_cast<T>(momentum * static_cast<double>(running_mean[c]) +
                                     (1.0 - momentum) * mean);
    running_var[c] = static_cast<T>(momentum * static_cast<double>(running_var[c]) +
                                    (1.0 - momentum) * var);
    if (want_grad) invstd_[c] = inv;
  }
  have_cache_ = want_grad;
  return out;
}

template <typename T>
Tensor<T> ChannelNorm<T>::backward(const Tensor<T>& dy) {
  if (!have_cache_) throw std::logic_error("ChannelNorm::backward without cached train forward");
  Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
  const int hw = dy.plane_size();
  const double m = static_cast<double>(dy.n) * hw;
  for (int c = 0; c < c_; ++c) {
    double s1 = 0.0, s2 = 0.0;
    for (int n = 0; n < dy.n; ++n) {
      const T* g = dy.plane(n, c);
      const T* xh = xhat_.plane(n, c);
      for (int e = 0; e < hw; ++e) {
        s1 += static_cast<double>(g[e]);
        s2 += static_cast<double>(g[e]) * static_cast<double>(xh[e]);
      }
    }
    ggrad[c] += static_cast<T>(s2);
    bgrad[c] += static_cast<T>(s1);
    const double scale = static_cast<double>(gamma[c]) * invstd_[c];
    const double mean_dy = s1 / m, mean_dyxh = s2 / m;
    for (int n = 0; n < dy.n; ++n) {
      const T* g = dy.plane(n, c);
      const T* xh = xhat_.plane(n, c);
      T* dst = dx.plane(n, c);
      for (int e = 0; e < hw; ++e)
        dst[e] = static_cast<T>(scale * (static_cast<double>(g[e]) - mean_dy -
                                         static_cast<double>(xh[e]) * mean_dyxh));
    }
  }
  have_cache_ = false;
  xhat_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// Relu
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& x, bool want_grad) {
  Tensor<T> out(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.v.size(); ++i) out.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
  if (want_grad) {
    saved_out_ = out;
    have_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& dy) {
  if (!have_cache_) throw std::logic_error("Relu::backward without cached forward");
  Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
  for (std::size_t i = 0; i < dy.v.size(); ++i)
    dx.v[i] = saved_out_.v[i] > T(0) ? dy.v[i] : T(0);
  have_cache_ = false;
  saved_out_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(int in_dim, int out_dim) : d_(in_dim), k_(out_dim) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("Linear: dims must be positive");
  weights.assign(static_cast<std::size_t>(in_dim) * out_dim, T(0));
  bias.assign(out_dim, T(0));
  wgrad.assign(weights.size(), T(0));
  bgrad.assign(bias.size(), T(0));
}

template <typename T>
void Linear<T>::init_params(Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d_));
  for (auto& v : weights) v = static_cast<T>(rng.gaussian() * stddev);
  std::fill(bias.begin(), bias.end(), T(0));
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, bool want_grad) {
  const int d = x.c * x.h * x.w;
  if (d != d_) throw std::invalid_argument("Linear: input dim mismatch");
  Tensor<T> out(x.n, k_, 1, 1);
  for (int n = 0; n < x.n; ++n) {
    const T* row = x.v.data() + static_cast<std::size_t>(n) * d;
    for (int k = 0; k < k_; ++k) {
      const T* wrow = weights.data() + static_cast<std::size_t>(k) * d;
      T acc = bias[k];
      for (int e = 0; e < d; ++e) acc += wrow[e] * row[e];
      out.at(n, k, 0, 0) = acc;
    }
  }
  if (want_grad) {
    saved_x_ = x;
    have_cache_ = true;
  }
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& dy) {
  if (!have_cache_) throw std::logic_error("Linear::backward without cached forward");
  const Tensor<T>& x = saved_x_;
  const int d = d_;
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  for (int n = 0; n < x.n; ++n) {
    const T* row = x.v.data() + static_cast<std::size_t>(n) * d;
    T* drow = dx.v.data() + static_cast<std::size_t>(n) * d;
    for (int k = 0; k < k_; ++k) {
      const T g = dy.at(n, k, 0, 0);
      bgrad[k] += g;
      T* wg = wgrad.data() + static_cast<std::size_t>(k) * d;
      const T* wrow = weights.data() + static_cast<std::size_t>(k) * d;
      for (int e = 0; e < d; ++e) {
        wg[e] += g * row[e];
        drow[e] += g * wrow[e];
      }
    }
  }
  have_cache_ = false;
  saved_x_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// softmax_cross_entropy
// ---------------------------------------------------------------------------

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const int n = logits.n;
  const int k = logits.c * logits.h * logits.w;
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  LossResult<T> res;
  res.grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const T* row = logits.v.data() + static_cast<std::size_t>(i) * k;
    double mx = static_cast<double>(row[0]);
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double logz = std::log(z);
    total += logz - (static_cast<double>(row[labels[i]]) - mx);
    T* g = res.grad.v.data() + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(static_cast<double>(row[j]) - mx) / z;
      g[j] = static_cast<T>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
    }
  }
  res.loss = total / n;
  return res;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class AvgPool2<float>;
template class AvgPool2<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class ChannelNorm<float>;
template class ChannelNorm<double>;
template class Relu<float>;
template class Relu<double>;
template class Linear<float>;
template class Linear<double>;
template LossResult<float> softmax_cross_entropy(const Tensor<float>&, const std::vector<int>&);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, const std::vector<int>&);

}  // namespace sre
