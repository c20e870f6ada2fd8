#include "sre/selfcheck.hpp"

#include <cmath>
#include <functional>

#include "sre/layers.hpp"
#include "sre/model.hpp"
#include "sre/ring.hpp"

namespace sre {

namespace {

double dot_all(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return s;
}

// Central finite differences of loss() against analytic, over one vector.
double grad_check_vector(std::vector<double>& values, const std::vector<double>& analytic,
                         const std::function<double()>& loss) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double lp = loss();
    values[i] = keep - h;
    const double lm = loss();
    values[i] = keep;
    const double numeric = (lp - lm) / (2.0 * h);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    worst = std::max(worst, rel);
  }
  return worst;
}

double grad_check_tensor(Tensor<double>& x, const Tensor<double>& analytic,
                         const std::function<double()>& loss) {
  std::vector<double> a = analytic.v;
  return grad_check_vector(x.v, a, loss);
}

template <typename T>
double commutation_error(const std::function<Tensor<T>(const Tensor<T>&)>& op,
                         const Tensor<T>& x) {
  Tensor<T> lhs = rot90(op(x), 1);
  Tensor<T> rhs = op(rot90(x, 1));
  return static_cast<double>(max_abs_diff(lhs, rhs));
}

template <typename T>
void run_layer_commutation(std::vector<CheckResult>& out, std::uint64_t seed, double tol,
                           const char* suffix) {
  Rng rng(seed);
  auto x = randn_tensor<T>(2, 3, 8, 8, rng);

  {
    Conv2d<T> conv(ConvKind::kSre, 3, 4, 5);
    conv.init_params(rng);
    for (auto& b : conv.bias) b = static_cast<T>(rng.gaussian() * 0.1);
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return conv.forward(t); }, x);
    out.push_back({std::string("commute.sre_conv_k5.") + suffix, err <= tol, err, tol});
  }
  {
    Conv2d<T> conv(ConvKind::kSre, 3, 4, 9);
    conv.init_params(rng);
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return conv.forward(t); }, x);
    out.push_back({std::string("commute.sre_conv_k9.") + suffix, err <= tol, err, tol});
  }
  {
    Conv2d<T> conv(ConvKind::kStandard, 3, 4, 1);
    conv.init_params(rng);
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return conv.forward(t); }, x);
    out.push_back({std::string("commute.conv_1x1.") + suffix, err <= tol, err, tol});
  }
  {
    AvgPool2<T> pool;
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return pool.forward(t); }, x);
    out.push_back({std::string("commute.avg_pool2.") + suffix, err <= tol, err, tol});
  }
  {
    GlobalAvgPool<T> gap;
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return gap.forward(t); }, x);
    out.push_back({std::string("commute.global_avg_pool.") + suffix, err <= tol, err, tol});
  }
  {
    Relu<T> relu;
    const double err = commutation_error<T>([&](const Tensor<T>& t) { return relu.forward(t); }, x);
    out.push_back({std::string("commute.relu.") + suffix, err <= tol, err, tol});
  }
  {
    ChannelNorm<T> norm(3);
    for (int c = 0; c < 3; ++c) {
      norm.gamma[c] = static_cast<T>(1.0 + 0.1 * c);
      norm.beta[c] = static_cast<T>(0.05 * c);
      norm.running_mean[c] = static_cast<T>(0.1 * c);
      norm.running_var[c] = static_cast<T>(1.0 + 0.2 * c);
    }
    const double err_eval = commutation_error<T>(
        [&](const Tensor<T>& t) { return norm.forward(t, /*train=*/false); }, x);
    out.push_back({std::string("commute.norm_eval.") + suffix, err_eval <= tol, err_eval, tol});
    ChannelNorm<T> norm_train(3);
    const double err_train = commutation_error<T>(
        [&](const Tensor<T>& t) {
          ChannelNorm<T> fresh(3);
          return fresh.forward(t, /*train=*/true);
        },
        x);
    out.push_back({std::string("commute.norm_train.") + suffix, err_train <= tol, err_train, tol});
  }
}

void run_gradient_checks(std::vector<CheckResult>& out, std::uint64_t seed) {
  const double tol = 1e-4;
  Rng rng(seed);

  auto check_conv = [&](ConvKind kind, int k, const char* name) {
    Conv2d<double> conv(kind, 2, 3, k);
    conv.init_params(rng);
    for (auto& b : conv.bias) b = rng.gaussian() * 0.1;
    auto x = randn_tensor<double>(2, 2, 6, 6, rng);
    auto p = randn_tensor<double>(2, 3, 6, 6, rng);
    auto loss = [&]() { return dot_all(conv.forward(x), p); };

    conv.forward(x, /*want_grad=*/true);
    Tensor<double> dx = conv.backward(p);
    double worst = grad_check_tensor(x, dx, loss);
    worst = std::max(worst, grad_check_vector(conv.weights, conv.wgrad, loss));
    worst = std::max(worst, grad_check_vector(conv.bias, conv.bgrad, loss));
    out.push_back({std::string("gradcheck.") + name, worst <= tol, worst, tol});
  };
  check_conv(ConvKind::kSre, 3, "sre_conv_k3");
  check_conv(ConvKind::kSre, 5, "sre_conv_k5");
  check_conv(ConvKind::kStandard, 3, "standard_conv_k3");
  check_conv(ConvKind::kStandard, 1, "conv_1x1");

  {
    AvgPool2<double> pool;
    auto x = randn_tensor<double>(2, 2, 6, 6, rng);
    auto p = randn_tensor<double>(2, 2, 3, 3, rng);
    auto loss = [&]() { return dot_all(pool.forward(x), p); };
    pool.forward(x, true);
    Tensor<double> dx = pool.backward(p);
    const double worst = grad_check_tensor(x, dx, loss);
    out.push_back({"gradcheck.avg_pool2", worst <= tol, worst, tol});
  }
  {
    GlobalAvgPool<double> gap;
    auto x = randn_tensor<double>(2, 3, 4, 4, rng);
    auto p = randn_tensor<double>(2, 3, 1, 1, rng);
    auto loss = [&]() { return dot_all(gap.forward(x), p); };
    gap.forward(x, true);
    Tensor<double> dx = gap.backward(p);
    const double worst = grad_check_tensor(x, dx, loss);
    out.push_back({"gradcheck.global_avg_pool", worst <= tol, worst, tol});
  }
  {
    auto x = randn_tensor<double>(3, 2, 5, 5, rng);
    auto p = randn_tensor<double>(3, 2, 5, 5, rng);
    ChannelNorm<double> norm(2);
    for (int c = 0; c < 2; ++c) {
      norm.gamma[c] = 1.0 + 0.2 * c;
      norm.beta[c] = 0.1 * c;
    }
    auto loss = [&]() { return dot_all(norm.forward(x, true), p); };
    norm.forward(x, true, true);
    Tensor<double> dx = norm.backward(p);
    double worst = grad_check_tensor(x, dx, loss);
    worst = std::max(worst, grad_check_vector(norm.gamma, norm.ggrad, loss));
    worst = std::max(worst, grad_check_vector(norm.beta, norm.bgrad, loss));
    out.push_back({"gradcheck.channel_norm", worst <= tol, worst, tol});
  }
  {
    Relu<double> relu;
    auto x = randn_tensor<double>(2, 3, 4, 4, rng);
    for (auto& v : x.v)
      if (std::abs(v) < 0.1) v += v >= 0 ? 0.2 : -0.2;  // stay away from the kink
    auto p = randn_tensor<double>(2, 3, 4, 4, rng);
    auto loss = [&]() { return dot_all(relu.forward(x), p); };
    relu.forward(x, true);
    Tensor<double> dx = relu.backward(p);
    const double worst = grad_check_tensor(x, dx, loss);
    out.push_back({"gradcheck.relu", worst <= tol, worst, tol});
  }
  {
    Linear<double> lin(8, 3);
    lin.init_params(rng);
    for (auto& b : lin.bias) b = rng.gaussian() * 0.1;
    auto x = randn_tensor<double>(4, 8, 1, 1, rng);
    auto p = randn_tensor<double>(4, 3, 1, 1, rng);
    auto loss = [&]() { return dot_all(lin.forward(x), p); };
    lin.forward(x, true);
    Tensor<double> dx = lin.backward(p);
    double worst = grad_check_tensor(x, dx, loss);
    worst = std::max(worst, grad_check_vector(lin.weights, lin.wgrad, loss));
    worst = std::max(worst, grad_check_vector(lin.bias, lin.bgrad, loss));
    out.push_back({"gradcheck.linear", worst <= tol, worst, tol});
  }
  {
    auto logits = randn_tensor<double>(5, 4, 1, 1, rng);
    std::vector<int> labels{0, 3, 1, 2, 2};
    auto loss = [&]() { return softmax_cross_entropy(logits, labels).loss; };
    LossResult<double> res = softmax_cross_entropy(logits, labels);
    const double worst = grad_check_tensor(logits, res.grad, loss);
    out.push_back({"gradcheck.softmax_cross_entropy", worst <= tol, worst, tol});
  }
}

}  // namespace

std::vector<CheckResult> run_equivariance_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;

  // kernel symmetry: expanded kernels equal their rotations/flips exactly
  {
    int violations = 0;
    for (int k : {1, 3, 5, 9}) {
      RingMap m = ring_index_map(k);
      Rng rng(seed_for(seed, "suite-kernel", k));
      for (int t = 0; t < 100; ++t) {
        std::vector<double> w(m.bands);
        for (auto& v : w) v = rng.gaussian();
        auto dense = expand_kernel(w, m);
        for (int y = 0; y < k; ++y)
          for (int x = 0; x < k; ++x) {
            const double v = dense[y * k + x];
            if (v != dense[x * k + (k - 1 - y)] || v != dense[y * k + (k - 1 - x)] ||
                v != dense[(k - 1 - y) * k + x])
              ++violations;
          }
      }
    }
    out.push_back({"kernel.symmetry_exact", violations == 0,
                   static_cast<double>(violations), 0.0});
  }

  // adjoint identity <expand(w), G> == <w, fold(G)>
  {
    double worst = 0.0;
    for (int k : {1, 3, 5, 9}) {
      RingMap m = ring_index_map(k);
      Rng rng(seed_for(seed, "suite-adjoint", k));
      for (int t = 0; t < 100; ++t) {
        std::vector<double> w(m.bands), g(static_cast<std::size_t>(k) * k);
        for (auto& v : w) v = rng.gaussian();
        for (auto& v : g) v = rng.gaussian();
        auto dense = expand_kernel(w, m);
        auto folded = fold_gradient(g, m);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < dense.size(); ++i) lhs += dense[i] * g[i];
        for (int r = 0; r < m.bands; ++r) rhs += w[r] * folded[r];
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
    out.push_back({"kernel.adjoint", worst <= 1e-12, worst, 1e-12});
  }

  run_layer_commutation<float>(out, seed_for(seed, "suite-commute-f32"), 1e-4, "f32");
  run_layer_commutation<double>(out, seed_for(seed, "suite-commute-f64"), 1e-10, "f64");

  // full feature extractor composition (SRE variant) at every tap
  {
    ModelConfig cfg;
    cfg.seed = seed_for(seed, "suite-model");
    Model<float> model(cfg);
    Rng rng(seed_for(seed, "suite-model-input"));
    auto x = randn_tensor<float>(1, 3, 64, 64, rng, 0.5);
    double worst = 0.0;
    for (int tap = 1; tap <= 4; ++tap) {
      Tensor<float> lhs = rot90(model.forward_features(x, tap), 1);
      Tensor<float> rhs = model.forward_features(rot90(x, 1), tap);
      worst = std::max(worst, static_cast<double>(max_abs_diff(lhs, rhs)));
    }
    out.push_back({"commute.model_taps.f32", worst <= 1e-4, worst, 1e-4});
    Tensor<float> lhs = model.forward_logits(x);
    Tensor<float> rhs = model.forward_logits(rot90(x, 1));
    const double lerr = static_cast<double>(max_abs_diff(lhs, rhs));
    out.push_back({"commute.model_logits.f32", lerr <= 1e-4, lerr, 1e-4});
  }

  run_gradient_checks(out, seed_for(seed, "suite-grad"));
  return out;
}

}  // namespace sre
