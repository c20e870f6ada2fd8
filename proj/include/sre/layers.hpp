#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sre/ring.hpp"
#include "sre/tensor.hpp"

namespace sre {

enum class ConvKind { kSre, kStandard };

inline int same_pad(int k) { return (k - 1) / 2; }

// Stride-1 "same" convolution (zero padding) over NCHW tensors.
//
// SRE kernels store one weight per ring and are expanded on the fly through
// the ring-sum factorization: per input channel the ring sums are shared by
// every output channel, and each ring sum is accumulated over quarter-turn
// orbits so the forward pass commutes bitwise with rot90 of the input.
// Standard kernels store dense k*k weights and run through im2col + GEMM.
template <typename T>
class Conv2d {
 public:
  Conv2d(ConvKind kind, int cin, int cout, int k);

  // Gaussian init, std = 1/sqrt(cin*k*k); biases zero.
  void init_params(Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool want_grad = false);
  // Accumulates into wgrad/bgrad, returns gradient w.r.t. the input.
  Tensor<T> backward(const Tensor<T>& dy);

  ConvKind kind() const { return kind_; }
  int kernel() const { return k_; }
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }
  int weights_per_filter() const;
  const RingMap& ring() const { return map_; }

  std::vector<T> weights;  // SRE: [cout][cin][bands]; standard: [cout][cin][k*k]
  std::vector<T> bias;     // [cout]
  std::vector<T> wgrad, bgrad;

 private:
  void forward_sre(const Tensor<T>& x, Tensor<T>& out, const T* scale,
                   int cin, int cout) const;
  void forward_standard(const Tensor<T>& x, Tensor<T>& out);
  void backward_standard(const Tensor<T>& dy, Tensor<T>& dx);

  ConvKind kind_;
  int cin_, cout_, k_;
  RingMap map_;
  Tensor<T> saved_x_;
  bool have_cache_ = false;
};

// Non-overlapping 2x2 mean pool; requires even spatial dims. The four block
// values are summed as diagonal pairs, which keeps the result bitwise stable
// under quarter turns.
template <typename T>
class AvgPool2 {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool want_grad = false);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// Per-channel spatial mean to (N, C, 1, 1). Values are sorted before
// summation so the output is bitwise invariant to any spatial permutation.
template <typename T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool want_grad = false);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> scratch_;
};

// Batch-style per-channel standardization over (N, H, W) with running
// statistics (momentum 0.9) and learned affine. Eval mode folds the running
// stats into one per-channel affine map, so it is pointwise.
template <typename T>
class ChannelNorm {
 public:
  explicit ChannelNorm(int channels);

  Tensor<T> forward(const Tensor<T>& x, bool train, bool want_grad = false);
  Tensor<T> backward(const Tensor<T>& dy);

  int channels() const { return c_; }

  std::vector<T> gamma, beta;
  std::vector<T> running_mean, running_var;
  std::vector<T> ggrad, bgrad;
  double momentum = 0.9;
  double eps = 1e-5;

 private:
  int c_;
  Tensor<T> xhat_;
  std::vector<double> invstd_;
  bool have_cache_ = false;
};

template <typename T>
class Relu {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool want_grad = false);
  Tensor<T> backward(const Tensor<T>& dy);

 private:
  Tensor<T> saved_out_;
  bool have_cache_ = false;
};

// Fully connected map from flattened (N, C*H*W) to (N, K, 1, 1).
template <typename T>
class Linear {
 public:
  Linear(int in_dim, int out_dim);

  void init_params(Rng& rng);  // std = 1/sqrt(in_dim)

  Tensor<T> forward(const Tensor<T>& x, bool want_grad = false);
  Tensor<T> backward(const Tensor<T>& dy);

  int in_dim() const { return d_; }
  int out_dim() const { return k_; }

  std::vector<T> weights;  // [out][in] row-major
  std::vector<T> bias;
  std::vector<T> wgrad, bgrad;

 private:
  int d_, k_;
  Tensor<T> saved_x_;
  bool have_cache_ = false;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;  // d loss / d logits
};

// Mean cross-entropy over the batch; softmax uses max subtraction.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

}  // namespace sre
