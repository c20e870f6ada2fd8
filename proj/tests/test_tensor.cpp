#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sre/tensor.hpp"

using namespace sre;

TEST_CASE("rot90 single turn matches the hand permutation") {
  Tensor<double> x(1, 1, 2, 2);
  x.v = {1, 2, 3, 4};
  auto r = rot90(x, 1);
  CHECK(r.v == std::vector<double>{2, 4, 1, 3});
}

TEST_CASE("rot90 identity cases") {
  Rng rng(42);
  auto x = randn_tensor<double>(2, 3, 4, 6, rng);
  CHECK(rot90(x, 0).v == x.v);
  CHECK(rot90(x, 4).v == x.v);
  CHECK(rot90(rot90(x, 1), 3).v == x.v);
  CHECK(rot90(x, -1).v == rot90(x, 3).v);
  auto r = rot90(x, 1);
  CHECK(r.h == x.w);
  CHECK(r.w == x.h);
}

TEST_CASE("tensor indexing and planes") {
  Tensor<float> t(2, 3, 4, 5);
  CHECK(t.size() == 2u * 3 * 4 * 5);
  t.at(1, 2, 3, 4) = 7.5f;
  CHECK(t.plane(1, 2)[3 * 5 + 4] == 7.5f);
  CHECK(all_finite(t));
  t.at(0, 0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(all_finite(t));
}

TEST_CASE("randn_tensor is reproducible for a fixed seed") {
  Rng a(123), b(123);
  auto x = randn_tensor<float>(1, 2, 3, 3, a, 0.5);
  auto y = randn_tensor<float>(1, 2, 3, 3, b, 0.5);
  CHECK(x.v == y.v);
}
