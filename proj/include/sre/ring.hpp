#pragma once

#include <array>
#include <stdexcept>
#include <vector>

namespace sre {

inline constexpr int kMaskedRing = -1;

// Orbit of one kernel offset under quarter-turn rotation. Members are linear
// indices into the k*k grid, ordered p, R(p), R^2(p), R^3(p). Summing an
// orbit as (v0 + v2) + (v1 + v3) is bitwise invariant under any quarter turn
// of the input, which the convolution path uses to stay exactly equivariant.
struct RingOrbit {
  std::array<int, 4> cell;
};

// Centrally symmetric ring parameterization of a k x k kernel: every offset
// at the same rounded Euclidean radius shares one trainable value. Offsets
// whose radius reaches ceil(k/2) fall outside the circular support and are
// masked (kernel corners for k >= 5).
struct RingMap {
  int k = 0;
  int bands = 0;
  int masked = 0;
  std::vector<int> ring_of;       // k*k row-major; kMaskedRing where masked
  std::vector<int> cardinality;   // per-ring pixel count, cardinality[0] == 1
  std::vector<std::vector<RingOrbit>> orbits;  // per ring; ring 0 has none
};

RingMap ring_index_map(int k);

// Trainable values per filter: ceil(k/2).
int param_count(int k);

// dense[u,v] = w[r(u,v)] / cardinality[r(u,v)], 0 at masked positions.
template <typename T>
void expand_kernel(const T* w, std::size_t w_len, const RingMap& m, T* dense) {
  if (static_cast<int>(w_len) != m.bands)
    throw std::invalid_argument("expand_kernel: weight length != bands");
  const int kk = m.k * m.k;
  for (int i = 0; i < kk; ++i) {
    const int r = m.ring_of[i];
    dense[i] = (r == kMaskedRing) ? T(0) : w[r] / static_cast<T>(m.cardinality[r]);
  }
}

// Adjoint of expand_kernel: grad[r] = sum over ring r of dense_grad / card[r].
template <typename T>
void fold_gradient(const T* dense_grad, std::size_t len, const RingMap& m, T* w_grad) {
  if (static_cast<int>(len) != m.k * m.k)
    throw std::invalid_argument("fold_gradient: dense gradient size != k*k");
  for (int r = 0; r < m.bands; ++r) w_grad[r] = T(0);
  const int kk = m.k * m.k;
  for (int i = 0; i < kk; ++i) {
    const int r = m.ring_of[i];
    if (r != kMaskedRing) w_grad[r] += dense_grad[i];
  }
  for (int r = 0; r < m.bands; ++r) w_grad[r] /= static_cast<T>(m.cardinality[r]);
}

template <typename T>
std::vector<T> expand_kernel(const std::vector<T>& w, const RingMap& m) {
  std::vector<T> dense(static_cast<std::size_t>(m.k) * m.k);
  expand_kernel(w.data(), w.size(), m, dense.data());
  return dense;
}

template <typename T>
std::vector<T> fold_gradient(const std::vector<T>& dense_grad, const RingMap& m) {
  std::vector<T> g(m.bands);
  fold_gradient(dense_grad.data(), dense_grad.size(), m, g.data());
  return g;
}

}  // namespace sre
