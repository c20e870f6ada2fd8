#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sre/tensor.hpp"

namespace sre {

// Malformed or truncated file; offset() is the byte position of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Planar float image, samples in [0, 1], 1 or 3 channels.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<float> v;

  Image() = default;
  Image(int h_, int w_, int c_)
      : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0f) {}
  float* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  const float* plane(int ci) const { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  float& at(int ci, int y, int x) { return plane(ci)[y * w + x]; }
  float at(int ci, int y, int x) const { return plane(ci)[y * w + x]; }
};

struct Mask {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0) {}
  bool at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x] != 0; }
  void set(int y, int x, bool on) { v[static_cast<std::size_t>(y) * w + x] = on ? 1 : 0; }
  int count() const {
    int n = 0;
    for (auto b : v) n += b != 0;
    return n;
  }
};

inline constexpr int kIgnoreLabel = 255;

// Per-pixel small-integer labels; kIgnoreLabel marks pixels outside the mask.
struct LabelMap {
  int h = 0, w = 0;
  std::vector<int> v;

  LabelMap() = default;
  LabelMap(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, kIgnoreLabel) {}
  int at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  void set(int y, int x, int label) { v[static_cast<std::size_t>(y) * w + x] = label; }
};

enum class Interp { kNearest, kBilinear };

// Rotation about the image center ((W-1)/2, (H-1)/2). Exact multiples of 90
// degrees dispatch to the quarter-turn permutation regardless of interp.
// Out-of-frame samples take the fill value.
Image rotate_image(const Image& img, double angle_deg, Interp interp, float fill = 1.0f);
LabelMap rotate_label_map(const LabelMap& labels, double angle_deg);

Image rot90_image(const Image& img, int turns);
LabelMap rot90_label_map(const LabelMap& m, int turns);
Mask rot90_mask(const Mask& m, int turns);

// Half-pixel-center resampling. Bilinear resizes clamp at the border.
Image resize_image(const Image& img, int out_h, int out_w, Interp interp);
LabelMap resize_label_map(const LabelMap& m, int out_h, int out_w);  // nearest
Mask resize_mask(const Mask& m, int out_h, int out_w);               // nearest
void resize_plane_bilinear(const float* src, int sh, int sw, float* dst, int oh, int ow);

// Gray mean of channels, threshold < 0.85, then binary opening and closing
// with a 3x3 plus-shaped element.
Mask tissue_mask(const Image& img);

// --- file formats ---------------------------------------------------------

// Binary PGM (P5) / PPM (P6), maxval 255.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);
LabelMap read_label_map(const std::string& path);
void write_label_map(const std::string& path, const LabelMap& m);
Mask read_mask(const std::string& path);
void write_mask(const std::string& path, const Mask& m);

// TensorFile: magic "SRET", u16 version, u16 rank, dims as u64 little-endian,
// payload f32 little-endian row-major.
struct TensorFileData {
  std::vector<std::uint64_t> dims;
  std::vector<float> data;
};
void write_tensor_file(const std::string& path, const std::vector<std::uint64_t>& dims,
                       const float* data);
TensorFileData read_tensor_file(const std::string& path);

Tensor<float> image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor<float>& t, int n_index = 0);

}  // namespace sre
