#include "sre/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sre/imaging.hpp"

namespace sre {

void validate_config(const ModelConfig& cfg) {
  if (cfg.stage_channels.size() != 4)
    throw std::invalid_argument("ModelConfig: exactly four stages required");
  if (cfg.sre_kernel_sizes.size() != 4)
    throw std::invalid_argument("ModelConfig: four SRE kernel sizes required");
  for (int k : cfg.sre_kernel_sizes)
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("ModelConfig: kernel sizes must be odd");
  if (cfg.standard_kernel_size < 1 || cfg.standard_kernel_size % 2 == 0)
    throw std::invalid_argument("ModelConfig: standard kernel size must be odd");
  for (std::size_t i = 1; i < cfg.stage_channels.size(); ++i)
    if (cfg.stage_channels[i] < cfg.stage_channels[i - 1])
      throw std::invalid_argument("ModelConfig: stage channels must be non-decreasing");
  if (cfg.stage_channels[0] < 1 || cfg.num_classes < 2 || cfg.in_channels < 1 ||
      cfg.blocks_per_stage < 1 || cfg.input_size < 8)
    throw std::invalid_argument("ModelConfig: invalid field value");
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  const double pi = 3.1415926535897932384626433832795;
  return base_lr * (1.0 + std::cos(pi * epoch / total_epochs)) / 2.0;
}

// ---------------------------------------------------------------------------
// ResidualBlock
// ---------------------------------------------------------------------------

template <typename T>
ResidualBlock<T>::ResidualBlock(ConvKind kind, int channels, int k)
    : conv1(kind, channels, channels, k),
      norm1(channels),
      conv2(kind, channels, channels, k),
      norm2(channels) {}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x, bool train, bool want_grad) {
  Tensor<T> t = conv1.forward(x, want_grad);
  t = norm1.forward(t, train, want_grad);
  t = relu1.forward(t, want_grad);
  t = conv2.forward(t, want_grad);
  t = norm2.forward(t, train, want_grad);
  for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] += x.v[i];
  return relu_out.forward(t, want_grad);
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dsum = relu_out.backward(dy);
  Tensor<T> d = norm2.backward(dsum);
  d = conv2.backward(d);
  d = relu1.backward(d);
  d = norm1.backward(d);
  Tensor<T> dx = conv1.backward(d);
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dsum.v[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

namespace {

int stage_kernel(const ModelConfig& cfg, int stage) {
  return cfg.variant == ConvKind::kSre ? cfg.sre_kernel_sizes[stage]
                                       : cfg.standard_kernel_size;
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg)
    : cfg_((validate_config(cfg), cfg)),
      stem_conv_(cfg.variant, cfg.in_channels, cfg.stage_channels[0], stage_kernel(cfg, 0)),
      stem_norm_(cfg.stage_channels[0]),
      gap_(),
      head_(cfg.stage_channels[3], cfg.num_classes) {
  for (int s = 0; s < 4; ++s) {
    std::vector<ResidualBlock<T>> blocks;
    for (int b = 0; b < cfg.blocks_per_stage; ++b)
      blocks.emplace_back(cfg.variant, cfg.stage_channels[s], stage_kernel(cfg, s));
    stages_.push_back(std::move(blocks));
  }
  for (int t = 0; t < 3; ++t) {
    pools_.emplace_back();
    trans_convs_.emplace_back(ConvKind::kStandard, cfg.stage_channels[t],
                              cfg.stage_channels[t + 1], 1);
  }
  // Deterministic init in layer order.
  Rng rng(seed_for(cfg.seed, "model-init"));
  stem_conv_.init_params(rng);
  for (auto& stage : stages_)
    for (auto& blk : stage) {
      blk.conv1.init_params(rng);
      blk.conv2.init_params(rng);
    }
  for (auto& tc : trans_convs_) tc.init_params(rng);
  head_.init_params(rng);
}

template <typename T>
Tensor<T> Model<T>::forward_impl(const Tensor<T>& x, int tap, bool train, bool want_grad,
                                 bool logits) {
  if (!logits && (tap < 1 || tap > 4))
    throw std::invalid_argument("forward_features: tap must be in 1..4");
  const int factor = 1 << (logits ? 3 : (tap - 1));
  if (x.h % factor != 0 || x.w % factor != 0)
    throw std::invalid_argument("forward: spatial dims must be divisible by the downsampling");

  Tensor<T> t = stem_conv_.forward(x, want_grad);
  t = stem_norm_.forward(t, train, want_grad);
  t = stem_relu_.forward(t, want_grad);
  for (int s = 0; s < 4; ++s) {
    for (auto& blk : stages_[s]) t = blk.forward(t, train, want_grad);
    if (!logits && tap == s + 1) return t;
    if (s < 3) {
      t = pools_[s].forward(t, want_grad);
      t = trans_convs_[s].forward(t, want_grad);
    }
  }
  t = gap_.forward(t, want_grad);
  return head_.forward(t, want_grad);
}

template <typename T>
Tensor<T> Model<T>::backward_impl(const Tensor<T>& dlogits) {
  Tensor<T> d = head_.backward(dlogits);
  d = gap_.backward(d);
  for (int s = 3; s >= 0; --s) {
    if (s < 3) {
      d = trans_convs_[s].backward(d);
      d = pools_[s].backward(d);
    }
    for (int b = static_cast<int>(stages_[s].size()) - 1; b >= 0; --b)
      d = stages_[s][b].backward(d);
  }
  d = stem_relu_.backward(d);
  d = stem_norm_.backward(d);
  return stem_conv_.backward(d);
}

template <typename T>
Tensor<T> Model<T>::forward_features(const Tensor<T>& x, int tap) {
  return forward_impl(x, tap, /*train=*/false, /*want_grad=*/false, /*logits=*/false);
}

template <typename T>
Tensor<T> Model<T>::forward_logits(const Tensor<T>& x) {
  return forward_impl(x, 0, /*train=*/false, /*want_grad=*/false, /*logits=*/true);
}

template <typename T>
double Model<T>::train_step(const Tensor<T>& x, const std::vector<int>& labels, int* correct) {
  Tensor<T> logits = forward_impl(x, 0, /*train=*/true, /*want_grad=*/true, /*logits=*/true);
  if (correct) {
    for (int n = 0; n < logits.n; ++n) {
      int best = 0;
      for (int k = 1; k < cfg_.num_classes; ++k)
        if (logits.at(n, k, 0, 0) > logits.at(n, best, 0, 0)) best = k;
      if (best == labels[n]) ++(*correct);
    }
  }
  LossResult<T> loss = softmax_cross_entropy(logits, labels);
  backward_impl(loss.grad);
  return loss.loss;
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::params() {
  std::vector<ParamRef<T>> out;
  auto add_conv = [&](const std::string& name, Conv2d<T>& c) {
    const bool sre = c.kind() == ConvKind::kSre;
    out.push_back({name + ".weight", sre ? "sre_conv" : "conv",
                   {c.out_channels(), c.in_channels(), c.weights_per_filter()}, &c.weights,
                   &c.wgrad});
    out.push_back({name + ".bias", "bias", {c.out_channels()}, &c.bias, &c.bgrad});
  };
  auto add_norm = [&](const std::string& name, ChannelNorm<T>& nrm) {
    out.push_back({name + ".gamma", "gamma", {nrm.channels()}, &nrm.gamma, &nrm.ggrad});
    out.push_back({name + ".beta", "beta", {nrm.channels()}, &nrm.beta, &nrm.bgrad});
    out.push_back({name + ".running_mean", "running_mean", {nrm.channels()},
                   &nrm.running_mean, nullptr});
    out.push_back({name + ".running_var", "running_var", {nrm.channels()},
                   &nrm.running_var, nullptr});
  };
  add_conv("stem.conv", stem_conv_);
  add_norm("stem.norm", stem_norm_);
  for (int s = 0; s < 4; ++s)
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string base = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      add_conv(base + ".conv1", stages_[s][b].conv1);
      add_norm(base + ".norm1", stages_[s][b].norm1);
      add_conv(base + ".conv2", stages_[s][b].conv2);
      add_norm(base + ".norm2", stages_[s][b].norm2);
    }
  for (int t = 0; t < 3; ++t)
    add_conv("transition" + std::to_string(t + 1) + ".conv", trans_convs_[t]);
  out.push_back({"head.weight", "linear", {head_.out_dim(), head_.in_dim()}, &head_.weights,
                 &head_.wgrad});
  out.push_back({"head.bias", "bias", {head_.out_dim()}, &head_.bias, &head_.bgrad});
  return out;
}

template <typename T>
std::size_t Model<T>::trainable_count() {
  std::size_t total = 0;
  for (auto& p : params())
    if (p.grad != nullptr) total += p.value->size();
  return total;
}

template <typename T>
void Model<T>::zero_grads() {
  for (auto& p : params())
    if (p.grad != nullptr) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

template <typename T>
void Model<T>::sgd_step(double lr, double momentum) {
  auto refs = params();
  if (velocity_.empty()) {
    for (auto& p : refs)
      velocity_.push_back(p.grad ? std::vector<T>(p.value->size(), T(0)) : std::vector<T>());
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!refs[i].grad) continue;
    auto& v = velocity_[i];
    auto& val = *refs[i].value;
    auto& g = *refs[i].grad;
    for (std::size_t j = 0; j < val.size(); ++j) {
      v[j] = static_cast<T>(momentum * v[j] - lr * g[j]);
      val[j] += v[j];
    }
  }
}

template <typename T>
std::vector<EpochStats> Model<T>::train(const LabeledImages& data, const TrainConfig& tc,
                                        std::uint64_t seed) {
  if (data.count() == 0) throw std::invalid_argument("train: empty dataset");
  if (static_cast<int>(data.labels.size()) != data.count())
    throw std::invalid_argument("train: label count mismatch");
  for (int lbl : data.labels)
    if (lbl < 0 || lbl >= cfg_.num_classes)
      throw std::invalid_argument("train: label out of range");

  const int n = data.count();
  const int c = data.images.c, h = data.images.h, w = data.images.w;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(seed_for(seed, "train-shuffle"));

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr = cosine_lr(tc.base_lr, epoch, tc.epochs);
    // Fisher-Yates with the project RNG
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += tc.batch_size) {
      const int bs = std::min(tc.batch_size, n - start);
      Tensor<T> batch(bs, c, h, w);
      std::vector<int> labels(bs);
      for (int b = 0; b < bs; ++b) {
        const int idx = order[start + b];
        const float* src = data.images.v.data() + static_cast<std::size_t>(idx) * c * h * w;
        T* dst = batch.v.data() + static_cast<std::size_t>(b) * c * h * w;
        for (std::size_t e = 0; e < static_cast<std::size_t>(c) * h * w; ++e)
          dst[e] = static_cast<T>(src[e]);
        labels[b] = data.labels[idx];
      }
      zero_grads();
      const double loss = train_step(batch, labels, &correct);
      sgd_step(lr, tc.momentum);
      loss_sum += loss * bs;
    }
    history.push_back({lr, loss_sum / n, static_cast<double>(correct) / n});
  }
  return history;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

namespace {

std::string kind_to_string(ConvKind k) { return k == ConvKind::kSre ? "sre" : "standard"; }

ConvKind kind_from_string(const std::string& s) {
  if (s == "sre") return ConvKind::kSre;
  if (s == "standard") return ConvKind::kStandard;
  throw std::invalid_argument("unknown model variant: " + s);
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void write_model_config(const std::string& path, const ModelConfig& cfg) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write model config: " + path);
  f << "variant = " << kind_to_string(cfg.variant) << "\n";
  f << "stage_channels = " << join_ints(cfg.stage_channels) << "\n";
  f << "blocks_per_stage = " << cfg.blocks_per_stage << "\n";
  f << "sre_kernel_sizes = " << join_ints(cfg.sre_kernel_sizes) << "\n";
  f << "standard_kernel_size = " << cfg.standard_kernel_size << "\n";
  f << "num_classes = " << cfg.num_classes << "\n";
  f << "in_channels = " << cfg.in_channels << "\n";
  f << "input_size = " << cfg.input_size << "\n";
  f << "seed = " << cfg.seed << "\n";
}

ModelConfig config_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read model config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  ModelConfig cfg;
  cfg.variant = kind_from_string(kv.at("variant"));
  cfg.stage_channels = split_ints(kv.at("stage_channels"));
  cfg.blocks_per_stage = std::stoi(kv.at("blocks_per_stage"));
  cfg.sre_kernel_sizes = split_ints(kv.at("sre_kernel_sizes"));
  cfg.standard_kernel_size = std::stoi(kv.at("standard_kernel_size"));
  cfg.num_classes = std::stoi(kv.at("num_classes"));
  cfg.in_channels = std::stoi(kv.at("in_channels"));
  cfg.input_size = std::stoi(kv.at("input_size"));
  cfg.seed = std::stoull(kv.at("seed"));
  return cfg;
}

template <typename T>
void Model<T>::save(const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_model_config(dir + "/model.config", cfg_);

  auto refs = params();
  std::ofstream manifest(dir + "/manifest.txt", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest: " + dir);
  std::vector<float> flat;
  for (auto& p : refs) {
    manifest << p.name << "\t" << p.kind << "\t";
    for (std::size_t i = 0; i < p.shape.size(); ++i)
      manifest << (i ? " " : "") << p.shape[i];
    manifest << "\n";
    for (T v : *p.value) flat.push_back(static_cast<float>(v));
  }
  write_tensor_file(dir + "/params.srt", {flat.size()}, flat.data());
}

template <typename T>
Model<float> Model<T>::load(const std::string& dir) {
  ModelConfig cfg = config_from_file(dir + "/model.config");
  Model<float> m(cfg);
  TensorFileData data = read_tensor_file(dir + "/params.srt");
  auto refs = m.params();
  std::size_t total = 0;
  for (auto& p : refs) total += p.value->size();
  if (data.data.size() != total)
    throw FormatError(dir + "/params.srt: parameter count mismatch", 8);
  std::size_t pos = 0;
  for (auto& p : refs) {
    std::copy(data.data.begin() + pos, data.data.begin() + pos + p.value->size(),
              p.value->begin());
    pos += p.value->size();
  }
  return m;
}

template class Model<float>;
template class Model<double>;
template struct ResidualBlock<float>;
template struct ResidualBlock<double>;

}  // namespace sre
