#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sre/ring.hpp"
#include "sre/rng.hpp"

using namespace sre;

namespace {

// Independent grid-symmetry helpers for the invariance checks.
std::vector<int> grid_rot90(const std::vector<int>& g, int k) {
  std::vector<int> out(g.size());
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) out[y * k + x] = g[x * k + (k - 1 - y)];
  return out;
}
std::vector<int> grid_flip_h(const std::vector<int>& g, int k) {
  std::vector<int> out(g.size());
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) out[y * k + x] = g[y * k + (k - 1 - x)];
  return out;
}
std::vector<int> grid_flip_v(const std::vector<int>& g, int k) {
  std::vector<int> out(g.size());
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) out[y * k + x] = g[(k - 1 - y) * k + x];
  return out;
}
std::vector<int> grid_transpose(const std::vector<int>& g, int k) {
  std::vector<int> out(g.size());
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) out[y * k + x] = g[x * k + y];
  return out;
}

template <typename T>
std::vector<T> dense_rot90(const std::vector<T>& g, int k) {
  std::vector<T> out(g.size());
  for (int y = 0; y < k; ++y)
    for (int x = 0; x < k; ++x) out[y * k + x] = g[x * k + (k - 1 - y)];
  return out;
}

}  // namespace

TEST_CASE("ring_index_map k=1") {
  RingMap m = ring_index_map(1);
  CHECK(m.bands == 1);
  CHECK(m.ring_of == std::vector<int>{0});
  CHECK(m.cardinality == std::vector<int>{1});
  CHECK(m.masked == 0);
}

TEST_CASE("ring_index_map k=3 hand enumeration") {
  RingMap m = ring_index_map(3);
  CHECK(m.bands == 2);
  CHECK(m.ring_of == std::vector<int>{1, 1, 1, 1, 0, 1, 1, 1, 1});
  CHECK(m.cardinality == std::vector<int>{1, 8});
  CHECK(m.masked == 0);
}

TEST_CASE("ring_index_map k=5 masks the four corners") {
  RingMap m = ring_index_map(5);
  CHECK(m.bands == 3);
  CHECK(m.cardinality == std::vector<int>{1, 8, 12});
  CHECK(m.masked == 4);
  // corners have round(sqrt(8)) = 3 >= bands
  CHECK(m.ring_of[0] == kMaskedRing);
  CHECK(m.ring_of[4] == kMaskedRing);
  CHECK(m.ring_of[20] == kMaskedRing);
  CHECK(m.ring_of[24] == kMaskedRing);
  int total = m.masked;
  for (int c : m.cardinality) total += c;
  CHECK(total == 25);
}

TEST_CASE("ring map symmetry and structural invariants") {
  for (int k : {1, 3, 5, 7, 9, 13, 31}) {
    RingMap m = ring_index_map(k);
    CHECK(m.ring_of == grid_rot90(m.ring_of, k));
    CHECK(m.ring_of == grid_flip_h(m.ring_of, k));
    CHECK(m.ring_of == grid_flip_v(m.ring_of, k));
    CHECK(m.ring_of == grid_transpose(m.ring_of, k));
    CHECK(m.ring_of[(k / 2) * k + k / 2] == 0);
    CHECK(m.cardinality[0] == 1);
    int total = m.masked;
    for (int c : m.cardinality) total += c;
    CHECK(total == k * k);
    // orbit bookkeeping: every non-center ring pixel sits in exactly one orbit
    for (int r = 1; r < m.bands; ++r) {
      CHECK(static_cast<int>(m.orbits[r].size()) * 4 == m.cardinality[r]);
      for (const auto& o : m.orbits[r])
        for (int idx : o.cell) CHECK(m.ring_of[idx] == r);
    }
    CHECK(m.orbits[0].empty());
  }
}

TEST_CASE("ring_index_map rejects invalid k") {
  CHECK_THROWS_AS(ring_index_map(0), std::invalid_argument);
  CHECK_THROWS_AS(ring_index_map(2), std::invalid_argument);
  CHECK_THROWS_AS(ring_index_map(-3), std::invalid_argument);
  CHECK_THROWS_AS(ring_index_map(33), std::invalid_argument);
}

TEST_CASE("param_count") {
  CHECK(param_count(9) == 5);
  CHECK(param_count(5) == 3);
  CHECK(param_count(1) == 1);
  CHECK_THROWS_AS(param_count(4), std::invalid_argument);
  CHECK_THROWS_AS(param_count(-1), std::invalid_argument);
}

TEST_CASE("expand_kernel examples") {
  RingMap m3 = ring_index_map(3);
  auto d = expand_kernel(std::vector<double>{1.0, 8.0}, m3);
  for (double x : d) CHECK(x == 1.0);

  RingMap m1 = ring_index_map(1);
  auto d1 = expand_kernel(std::vector<double>{3.25}, m1);
  CHECK(d1 == std::vector<double>{3.25});

  RingMap m5 = ring_index_map(5);
  auto d5 = expand_kernel(std::vector<double>{1.0, 0.0, 0.0}, m5);
  for (int i = 0; i < 25; ++i) CHECK(d5[i] == (i == 12 ? 1.0 : 0.0));

  CHECK_THROWS_AS(expand_kernel(std::vector<double>{1.0}, m3), std::invalid_argument);
}

TEST_CASE("expanded kernels are exactly symmetric under rot90 and flips") {
  for (int k : {1, 3, 5, 9}) {
    RingMap m = ring_index_map(k);
    Rng rng(seed_for(99, "kernel-sym", k));
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> w(m.bands);
      for (auto& x : w) x = rng.gaussian();
      auto dense = expand_kernel(w, m);
      auto r = dense_rot90(dense, k);
      CHECK(dense == r);
      std::vector<double> fh(dense.size()), fv(dense.size());
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x) {
          fh[y * k + x] = dense[y * k + (k - 1 - x)];
          fv[y * k + x] = dense[(k - 1 - y) * k + x];
        }
      CHECK(dense == fh);
      CHECK(dense == fv);
    }
  }
}

TEST_CASE("fold_gradient examples") {
  RingMap m3 = ring_index_map(3);
  auto g = fold_gradient(std::vector<double>(9, 1.0), m3);
  CHECK(g == std::vector<double>{1.0, 1.0});

  g = fold_gradient(std::vector<double>(9, 0.0), m3);
  CHECK(g == std::vector<double>{0.0, 0.0});

  std::vector<double> center_only(9, 0.0);
  center_only[4] = 1.0;
  g = fold_gradient(center_only, m3);
  CHECK(g == std::vector<double>{1.0, 0.0});

  CHECK_THROWS_AS(fold_gradient(std::vector<double>(8, 0.0), m3), std::invalid_argument);
}

TEST_CASE("fold_gradient is the exact adjoint of expand_kernel") {
  for (int k : {1, 3, 5, 9}) {
    RingMap m = ring_index_map(k);
    Rng rng(seed_for(7, "adjoint", k));
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> w(m.bands), grad(static_cast<std::size_t>(k) * k);
      for (auto& x : w) x = rng.gaussian();
      for (auto& x : grad) x = rng.gaussian();
      auto dense = expand_kernel(w, m);
      auto folded = fold_gradient(grad, m);
      double lhs = 0.0, rhs = 0.0;
      for (std::size_t i = 0; i < dense.size(); ++i) lhs += dense[i] * grad[i];
      for (int r = 0; r < m.bands; ++r) rhs += w[r] * folded[r];
      CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
  }
}

TEST_CASE("expand then fold recovers ring-constant kernels") {
  for (int k : {3, 5, 9}) {
    RingMap m = ring_index_map(k);
    Rng rng(seed_for(11, "roundtrip", k));
    std::vector<double> w(m.bands);
    for (auto& x : w) x = rng.gaussian();
    // A dense kernel that is constant per ring: value w[r] at each ring pixel.
    std::vector<double> dense(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k * k; ++i)
      if (m.ring_of[i] != kMaskedRing) dense[i] = w[m.ring_of[i]];
    auto back = fold_gradient(dense, m);
    for (int r = 0; r < m.bands; ++r) CHECK(back[r] == doctest::Approx(w[r]).epsilon(1e-14));
  }
}
