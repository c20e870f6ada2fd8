#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sre/layers.hpp"

namespace sre {

struct ModelConfig {
  ConvKind variant = ConvKind::kSre;
  std::vector<int> stage_channels{16, 32, 64, 128};
  int blocks_per_stage = 1;
  std::vector<int> sre_kernel_sizes{9, 9, 5, 5};
  int standard_kernel_size = 3;  // dense baseline uses ResNet-style 3x3 kernels
  int num_classes = 4;
  int in_channels = 3;
  int input_size = 64;
  std::uint64_t seed = 0;
};

void validate_config(const ModelConfig& cfg);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 24;
  double base_lr = 2e-2;
  double momentum = 0.9;
};

// lr(epoch) = base_lr * (1 + cos(pi * epoch / epochs)) / 2
double cosine_lr(double base_lr, int epoch, int total_epochs);

struct EpochStats {
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct LabeledImages {
  Tensor<float> images;  // (N, C, H, W)
  std::vector<int> labels;
  int count() const { return images.n; }
};

// Named handle on one parameter (or state) vector of the model.
template <typename T>
struct ParamRef {
  std::string name;
  std::string kind;  // sre_conv | conv | bias | gamma | beta | running_mean | running_var | linear
  std::vector<int> shape;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;  // null for running statistics
};

template <typename T>
struct ResidualBlock {
  Conv2d<T> conv1;
  ChannelNorm<T> norm1;
  Relu<T> relu1;
  Conv2d<T> conv2;
  ChannelNorm<T> norm2;
  Relu<T> relu_out;
  Tensor<T> saved_sum_grad_path_;  // skip gradient buffer

  ResidualBlock(ConvKind kind, int channels, int k);
  Tensor<T> forward(const Tensor<T>& x, bool train, bool want_grad);
  Tensor<T> backward(const Tensor<T>& dy);
};

// SRENet-mini / ResNet-mini: stem conv -> 4 residual stages with
// avg-pool + 1x1 conv transitions, classifier head over global pooling.
// Feature taps L in {1,2,3,4} expose the map after each stage.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  Tensor<T> forward_features(const Tensor<T>& x, int tap);
  Tensor<T> forward_logits(const Tensor<T>& x);

  // One mini-batch of training: forward with caches, loss, backward.
  double train_step(const Tensor<T>& x, const std::vector<int>& labels, int* correct);
  void zero_grads();
  void sgd_step(double lr, double momentum);

  std::vector<EpochStats> train(const LabeledImages& data, const TrainConfig& tc,
                                std::uint64_t seed);

  std::vector<ParamRef<T>> params();
  std::size_t trainable_count();

  void save(const std::string& dir);
  static Model<float> load(const std::string& dir);

 private:
  Tensor<T> forward_impl(const Tensor<T>& x, int tap, bool train, bool want_grad,
                         bool logits);
  Tensor<T> backward_impl(const Tensor<T>& dlogits);

  ModelConfig cfg_;
  Conv2d<T> stem_conv_;
  ChannelNorm<T> stem_norm_;
  Relu<T> stem_relu_;
  std::vector<std::vector<ResidualBlock<T>>> stages_;
  std::vector<AvgPool2<T>> pools_;
  std::vector<Conv2d<T>> trans_convs_;
  GlobalAvgPool<T> gap_;
  Linear<T> head_;
  std::vector<std::vector<T>> velocity_;
};

ModelConfig config_from_file(const std::string& path);
void write_model_config(const std::string& path, const ModelConfig& cfg);

}  // namespace sre
