#include "sre/ring.hpp"

#include <cmath>
#include <stdexcept>

namespace sre {

int param_count(int k) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("param_count: k must be odd and positive");
  return (k + 1) / 2;
}

RingMap ring_index_map(int k) {
  if (k < 1 || k > 31 || k % 2 == 0)
    throw std::invalid_argument("ring_index_map: k must be odd, 1 <= k <= 31");

  RingMap m;
  m.k = k;
  m.bands = (k + 1) / 2;
  m.ring_of.assign(static_cast<std::size_t>(k) * k, kMaskedRing);
  m.cardinality.assign(m.bands, 0);
  m.orbits.resize(m.bands);

  const int half = (k - 1) / 2;
  auto cell_index = [&](int u, int v) { return (u + half) * k + (v + half); };

  for (int u = -half; u <= half; ++u) {
    for (int v = -half; v <= half; ++v) {
      // round-half-up; u*u + v*v is an integer so sqrt never lands on .5 exactly
      const int r = static_cast<int>(std::floor(std::sqrt(double(u) * u + double(v) * v) + 0.5));
      if (r >= m.bands) {
        ++m.masked;
        continue;
      }
      m.ring_of[cell_index(u, v)] = r;
      ++m.cardinality[r];
    }
  }

  // Group ring offsets into quarter-turn orbits: (u,v) -> (v,-u). Every
  // non-center offset has an orbit of exactly four distinct members.
  std::vector<char> seen(m.ring_of.size(), 0);
  for (int u = -half; u <= half; ++u) {
    for (int v = -half; v <= half; ++v) {
      const int idx = cell_index(u, v);
      const int r = m.ring_of[idx];
      if (r == kMaskedRing || r == 0 || seen[idx]) continue;
      RingOrbit orbit;
      int cu = u, cv = v;
      for (int t = 0; t < 4; ++t) {
        const int ci = cell_index(cu, cv);
        orbit.cell[t] = ci;
        seen[ci] = 1;
        const int nu = cv, nv = -cu;
        cu = nu;
        cv = nv;
      }
      m.orbits[r].push_back(orbit);
    }
  }
  return m;
}

}  // namespace sre
