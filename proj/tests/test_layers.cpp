#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sre/layers.hpp"
#include "test_util.hpp"

using namespace sre;
using sre::testutil::dot;
using sre::testutil::fd_check;
using sre::testutil::naive_conv;

namespace {

template <typename T>
std::vector<T> dense_bank(const Conv2d<T>& conv) {
  const int k = conv.kernel();
  std::vector<T> bank(static_cast<std::size_t>(conv.out_channels()) * conv.in_channels() * k * k);
  if (conv.kind() == ConvKind::kSre) {
    const RingMap& m = conv.ring();
    for (int f = 0; f < conv.out_channels() * conv.in_channels(); ++f)
      expand_kernel(conv.weights.data() + static_cast<std::size_t>(f) * m.bands,
                    static_cast<std::size_t>(m.bands), m,
                    bank.data() + static_cast<std::size_t>(f) * k * k);
  } else {
    bank = conv.weights;
  }
  return bank;
}

}  // namespace

TEST_CASE("conv k=1 SRE identity kernel") {
  Conv2d<double> conv(ConvKind::kSre, 1, 1, 1);
  conv.weights = {1.0};
  Tensor<double> x(1, 1, 2, 2);
  x.v = {1, 2, 3, 4};
  auto y = conv.forward(x);
  CHECK(y.v == x.v);
}

TEST_CASE("conv k=3 SRE all-ones kernel on all-ones input") {
  Conv2d<double> conv(ConvKind::kSre, 1, 1, 3);
  conv.weights = {1.0, 8.0};  // expands to all ones
  Tensor<double> x(1, 1, 3, 3);
  x.fill(1.0);
  auto y = conv.forward(x);
  CHECK(y.at(0, 0, 1, 1) == doctest::Approx(9.0));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx(6.0));
  CHECK(y.at(0, 0, 1, 0) == doctest::Approx(6.0));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(4.0));
  CHECK(y.at(0, 0, 2, 2) == doctest::Approx(4.0));
}

TEST_CASE("conv matches the naive dense reference") {
  Rng rng(seed_for(3, "conv-ref"));
  for (ConvKind kind : {ConvKind::kSre, ConvKind::kStandard}) {
    for (int k : {1, 3, 5, 9}) {
      Conv2d<double> conv(kind, 3, 4, k);
      conv.init_params(rng);
      for (auto& b : conv.bias) b = rng.gaussian() * 0.2;
      auto x = randn_tensor<double>(2, 3, 10, 10, rng);
      auto ours = conv.forward(x);
      auto ref = naive_conv(x, dense_bank(conv), conv.bias, 4, k);
      CHECK(max_abs_diff(ours, ref) <= 1e-12);
    }
  }
  // float path against the double reference
  Conv2d<float> conv(ConvKind::kSre, 2, 3, 5);
  conv.init_params(rng);
  auto xf = randn_tensor<float>(1, 2, 12, 12, rng);
  auto ours = conv.forward(xf);
  auto ref32 = naive_conv(xf, dense_bank(conv), conv.bias, 3, 5);
  CHECK(max_abs_diff(ours, ref32) <= 1e-4f);
}

TEST_CASE("SRE conv commutes with rot90 bitwise; standard conv does not") {
  Rng rng(seed_for(4, "conv-rot"));
  Conv2d<float> sre(ConvKind::kSre, 3, 5, 9);
  sre.init_params(rng);
  for (auto& b : sre.bias) b = static_cast<float>(rng.gaussian() * 0.1);
  auto x = randn_tensor<float>(2, 3, 16, 16, rng);
  auto lhs = rot90(sre.forward(x), 1);
  auto rhs = sre.forward(rot90(x, 1));
  CHECK(max_abs_diff(lhs, rhs) == 0.0f);  // bitwise by the orbit-sum design

  Conv2d<float> std_conv(ConvKind::kStandard, 3, 5, 3);
  std_conv.init_params(rng);
  auto l2 = rot90(std_conv.forward(x), 1);
  auto r2 = std_conv.forward(rot90(x, 1));
  CHECK(max_abs_diff(l2, r2) > 1e-3f);
}

TEST_CASE("conv rejects invalid setups") {
  CHECK_THROWS_AS(Conv2d<float>(ConvKind::kSre, 3, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(Conv2d<float>(ConvKind::kSre, 0, 4, 3), std::invalid_argument);
  Conv2d<float> conv(ConvKind::kSre, 3, 4, 3);
  Tensor<float> x(1, 2, 4, 4);
  CHECK_THROWS_AS(conv.forward(x), std::invalid_argument);
}

TEST_CASE("SRE layers store ceil(k/2) weights per filter, standard store k^2") {
  Conv2d<float> sre(ConvKind::kSre, 2, 3, 9);
  CHECK(sre.weights_per_filter() == 5);
  CHECK(sre.weights.size() == 2u * 3 * 5);
  Conv2d<float> dense(ConvKind::kStandard, 2, 3, 9);
  CHECK(dense.weights_per_filter() == 81);
  CHECK(dense.weights.size() == 2u * 3 * 81);
}

TEST_CASE("avg_pool2 examples") {
  AvgPool2<double> pool;
  Tensor<double> x(1, 1, 2, 2);
  x.v = {1, 2, 3, 4};
  auto y = pool.forward(x);
  CHECK(y.v == std::vector<double>{2.5});

  Tensor<double> c(2, 3, 4, 4);
  c.fill(7.25);
  auto yc = pool.forward(c);
  for (double v : yc.v) CHECK(v == 7.25);

  Rng rng(11);
  auto r = randn_tensor<float>(1, 2, 8, 8, rng);
  AvgPool2<float> poolf;
  CHECK(max_abs_diff(rot90(poolf.forward(r), 1), poolf.forward(rot90(r, 1))) == 0.0f);

  Tensor<double> odd(1, 1, 3, 4);
  CHECK_THROWS_AS(pool.forward(odd), std::invalid_argument);
}

TEST_CASE("global_avg_pool examples") {
  GlobalAvgPool<double> gap;
  Tensor<double> x(1, 1, 2, 2);
  x.v = {1, 3, 5, 7};
  CHECK(gap.forward(x).v == std::vector<double>{4.0});

  Rng rng(12);
  auto r = randn_tensor<float>(2, 3, 6, 6, rng);
  GlobalAvgPool<float> gapf;
  auto a = gapf.forward(r);
  auto b = gapf.forward(rot90(r, 1));
  CHECK(a.v == b.v);  // bitwise: sorted summation is permutation invariant

  Tensor<double> z(1, 2, 4, 4);
  CHECK(gap.forward(z).v == std::vector<double>{0.0, 0.0});
}

TEST_CASE("channel_affine_norm behavior") {
  // standardized input stays put under gamma=1, beta=0
  Tensor<double> x(1, 1, 2, 2);
  x.v = {-1.0, 1.0, -1.0, 1.0};  // zero mean, unit variance
  ChannelNorm<double> norm(1);
  auto y = norm.forward(x, /*train=*/true);
  for (std::size_t i = 0; i < x.v.size(); ++i)
    CHECK(y.v[i] == doctest::Approx(x.v[i]).epsilon(1e-4));

  // gamma = 0 pins the output at beta
  ChannelNorm<double> norm2(1);
  norm2.gamma[0] = 0.0;
  norm2.beta[0] = 0.75;
  auto y2 = norm2.forward(x, true);
  for (double v : y2.v) CHECK(v == 0.75);

  // eval before any train call uses the initialized running stats
  ChannelNorm<double> norm3(1);
  Tensor<double> q(1, 1, 1, 2);
  q.v = {2.0, -2.0};
  auto y3 = norm3.forward(q, /*train=*/false);
  CHECK(y3.v[0] == doctest::Approx(2.0 / std::sqrt(1.0 + 1e-5)));

  Tensor<double> tiny(1, 1, 1, 1);
  ChannelNorm<double> norm4(1);
  CHECK_THROWS_AS(norm4.forward(tiny, true), std::invalid_argument);

  // running statistics move toward the batch statistics with momentum 0.9
  ChannelNorm<double> norm5(1);
  Tensor<double> s(1, 1, 1, 4);
  s.v = {1.0, 1.0, 3.0, 3.0};  // mean 2, var 1
  norm5.forward(s, true);
  CHECK(norm5.running_mean[0] == doctest::Approx(0.2));
  CHECK(norm5.running_var[0] == doctest::Approx(0.9 + 0.1 * 1.0));
}

TEST_CASE("norm commutes with rot90 in both modes") {
  Rng rng(13);
  auto x = randn_tensor<float>(2, 3, 6, 6, rng);
  ChannelNorm<float> norm(3);
  for (int c = 0; c < 3; ++c) {
    norm.gamma[c] = 1.0f + 0.3f * c;
    norm.beta[c] = 0.1f * c;
    norm.running_mean[c] = 0.2f * c;
    norm.running_var[c] = 1.0f + 0.5f * c;
  }
  CHECK(max_abs_diff(rot90(norm.forward(x, false), 1), norm.forward(rot90(x, 1), false)) ==
        0.0f);
  ChannelNorm<float> a(3), b(3);
  CHECK(max_abs_diff(rot90(a.forward(x, true), 1), b.forward(rot90(x, 1), true)) <= 1e-4f);
}

TEST_CASE("relu and linear basics") {
  Relu<double> relu;
  Tensor<double> x(1, 1, 1, 2);
  x.v = {-1.0, 2.0};
  CHECK(relu.forward(x).v == std::vector<double>{0.0, 2.0});

  Linear<double> lin(3, 2);
  lin.weights = {1, 0, 0, 0, 1, 0};
  lin.bias = {0.5, -0.5};
  Tensor<double> in(1, 3, 1, 1);
  in.v = {2, 3, 4};
  auto out = lin.forward(in);
  CHECK(out.v == std::vector<double>{2.5, 2.5});

  Tensor<double> bad(1, 4, 1, 1);
  CHECK_THROWS_AS(lin.forward(bad), std::invalid_argument);
}

TEST_CASE("softmax cross entropy examples") {
  // uniform logits over K classes -> ln K
  for (int k : {2, 4, 7}) {
    Tensor<double> logits(1, k, 1, 1);
    logits.fill(0.31);
    auto res = softmax_cross_entropy(logits, {0});
    CHECK(std::abs(res.loss - std::log(static_cast<double>(k))) <= 1e-12);
  }
  // logits [10, -10], label 0 -> -ln sigmoid(20)
  Tensor<double> logits(1, 2, 1, 1);
  logits.v = {10.0, -10.0};
  auto res = softmax_cross_entropy(logits, {0});
  CHECK(res.loss == doctest::Approx(2.0611536181902037e-9).epsilon(1e-6));

  CHECK_THROWS_AS(softmax_cross_entropy(logits, {2}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1}), std::invalid_argument);

  // loss is non-negative on random inputs
  Rng rng(14);
  auto r = randn_tensor<double>(6, 5, 1, 1, rng);
  std::vector<int> labels{0, 1, 2, 3, 4, 0};
  CHECK(softmax_cross_entropy(r, labels).loss >= 0.0);
}

// --------------------------------------------------------------------------
// finite-difference gradient checks (double, step 1e-5, rel err <= 1e-4)
// --------------------------------------------------------------------------

TEST_CASE("gradcheck: conv variants") {
  Rng rng(seed_for(21, "gc-conv"));
  struct Setup {
    ConvKind kind;
    int k;
  };
  for (Setup s : {Setup{ConvKind::kSre, 3}, Setup{ConvKind::kSre, 5},
                  Setup{ConvKind::kStandard, 3}, Setup{ConvKind::kStandard, 1}}) {
    Conv2d<double> conv(s.kind, 2, 3, s.k);
    conv.init_params(rng);
    for (auto& b : conv.bias) b = rng.gaussian() * 0.1;
    auto x = randn_tensor<double>(2, 2, 6, 6, rng);
    auto p = randn_tensor<double>(2, 3, 6, 6, rng);
    auto loss = [&]() { return dot(conv.forward(x), p); };

    conv.forward(x, true);
    auto dx = conv.backward(p);
    CHECK(fd_check(x.v, dx.v, loss) <= 1e-4);
    CHECK(fd_check(conv.weights, conv.wgrad, loss) <= 1e-4);
    CHECK(fd_check(conv.bias, conv.bgrad, loss) <= 1e-4);
  }
}

TEST_CASE("gradcheck: pooling") {
  Rng rng(seed_for(22, "gc-pool"));
  AvgPool2<double> pool;
  auto x = randn_tensor<double>(2, 2, 6, 6, rng);
  auto p = randn_tensor<double>(2, 2, 3, 3, rng);
  auto loss = [&]() { return dot(pool.forward(x), p); };
  pool.forward(x, true);
  auto dx = pool.backward(p);
  CHECK(fd_check(x.v, dx.v, loss) <= 1e-4);

  GlobalAvgPool<double> gap;
  auto q = randn_tensor<double>(2, 2, 1, 1, rng);
  auto loss2 = [&]() { return dot(gap.forward(x), q); };
  gap.forward(x, true);
  auto dx2 = gap.backward(q);
  CHECK(fd_check(x.v, dx2.v, loss2) <= 1e-4);
}

TEST_CASE("gradcheck: norm, relu, linear, loss") {
  Rng rng(seed_for(23, "gc-rest"));
  {
    ChannelNorm<double> norm(2);
    norm.gamma = {1.1, 0.9};
    norm.beta = {0.2, -0.1};
    auto x = randn_tensor<double>(3, 2, 4, 4, rng);
    auto p = randn_tensor<double>(3, 2, 4, 4, rng);
    auto loss = [&]() { return dot(norm.forward(x, true), p); };
    norm.forward(x, true, true);
    auto dx = norm.backward(p);
    CHECK(fd_check(x.v, dx.v, loss) <= 1e-4);
    CHECK(fd_check(norm.gamma, norm.ggrad, loss) <= 1e-4);
    CHECK(fd_check(norm.beta, norm.bgrad, loss) <= 1e-4);
  }
  {
    Relu<double> relu;
    auto x = randn_tensor<double>(2, 2, 4, 4, rng);
    for (auto& v : x.v)
      if (std::abs(v) < 0.05) v += 0.1;
    auto p = randn_tensor<double>(2, 2, 4, 4, rng);
    auto loss = [&]() { return dot(relu.forward(x), p); };
    relu.forward(x, true);
    auto dx = relu.backward(p);
    CHECK(fd_check(x.v, dx.v, loss) <= 1e-4);
  }
  {
    Linear<double> lin(6, 4);
    lin.init_params(rng);
    auto x = randn_tensor<double>(3, 6, 1, 1, rng);
    auto p = randn_tensor<double>(3, 4, 1, 1, rng);
    auto loss = [&]() { return dot(lin.forward(x), p); };
    lin.forward(x, true);
    auto dx = lin.backward(p);
    CHECK(fd_check(x.v, dx.v, loss) <= 1e-4);
    CHECK(fd_check(lin.weights, lin.wgrad, loss) <= 1e-4);
    CHECK(fd_check(lin.bias, lin.bgrad, loss) <= 1e-4);
  }
  {
    auto logits = randn_tensor<double>(4, 3, 1, 1, rng);
    std::vector<int> labels{0, 2, 1, 1};
    auto loss = [&]() { return softmax_cross_entropy(logits, labels).loss; };
    auto res = softmax_cross_entropy(logits, labels);
    CHECK(fd_check(logits.v, res.grad.v, loss) <= 1e-4);
  }
}

TEST_CASE("all outputs stay finite through a conv-norm-relu-pool stack") {
  Rng rng(seed_for(24, "finite"));
  Conv2d<float> conv(ConvKind::kSre, 3, 8, 5);
  conv.init_params(rng);
  ChannelNorm<float> norm(8);
  Relu<float> relu;
  AvgPool2<float> pool;
  auto x = randn_tensor<float>(2, 3, 8, 8, rng);
  auto y = pool.forward(relu.forward(norm.forward(conv.forward(x), true)));
  CHECK(all_finite(y));
}
