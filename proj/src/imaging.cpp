#include "sre/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace sre {

static_assert(std::endian::native == std::endian::little,
              "TensorFile I/O assumes a little-endian host");

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

bool quarter_turn(double angle_deg, int& turns) {
  const double q = angle_deg / 90.0;
  const double r = std::round(q);
  if (std::abs(q - r) > 1e-9) return false;
  turns = static_cast<int>(static_cast<long long>(r) % 4);
  if (turns < 0) turns += 4;
  return true;
}

// Inverse rotation map in (row, col) coordinates; consistent with rot90:
// a 90-degree turn sends out(y, x) to in(x, W-1-y).
struct InverseRotation {
  double cy, cx, cs, sn;
  InverseRotation(int h, int w, double angle_deg)
      : cy((h - 1) / 2.0), cx((w - 1) / 2.0) {
    const double rad = angle_deg * kPi / 180.0;
    cs = std::cos(rad);
    sn = std::sin(rad);
  }
  void map(int y, int x, double& sy, double& sx) const {
    const double dy = y - cy, dx = x - cx;
    sy = cy + cs * dy + sn * dx;
    sx = cx - sn * dy + cs * dx;
  }
};

// Bilinear sample with diagonal-pair summation; corners outside the frame
// take the fill value. The grouping keeps square-image resampling bitwise
// stable under quarter turns.
float sample_bilinear(const float* p, int h, int w, double sy, double sx, float fill) {
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const float fy = static_cast<float>(sy - y0);
  const float fx = static_cast<float>(sx - x0);
  auto value = [&](int y, int x) -> float {
    return (y < 0 || y >= h || x < 0 || x >= w) ? fill : p[static_cast<std::size_t>(y) * w + x];
  };
  const float a = value(y0, x0), b = value(y0, x0 + 1);
  const float c = value(y0 + 1, x0), d = value(y0 + 1, x0 + 1);
  const float wa = (1.0f - fy) * (1.0f - fx);
  const float wb = (1.0f - fy) * fx;
  const float wc = fy * (1.0f - fx);
  const float wd = fy * fx;
  return (wa * a + wd * d) + (wb * b + wc * c);
}

int nearest_index(double s, int size) {
  const int i = static_cast<int>(std::floor(s + 0.5));  // round half up
  return (i < 0 || i >= size) ? -1 : i;
}

template <typename V>
std::vector<V> rot90_plane(const std::vector<V>& src, int h, int w, int turns,
                           int& oh, int& ow) {
  int q = ((turns % 4) + 4) % 4;
  std::vector<V> cur = src;
  int ch = h, cw = w;
  for (int t = 0; t < q; ++t) {
    std::vector<V> out(cur.size());
    for (int y = 0; y < cw; ++y)
      for (int x = 0; x < ch; ++x)
        out[static_cast<std::size_t>(y) * ch + x] =
            cur[static_cast<std::size_t>(x) * cw + (cw - 1 - y)];
    cur = std::move(out);
    std::swap(ch, cw);
  }
  oh = ch;
  ow = cw;
  return cur;
}

Mask erode_plus(const Mask& m) {
  Mask out(m.h, m.w);
  auto get = [&](int y, int x) {
    return y >= 0 && y < m.h && x >= 0 && x < m.w && m.at(y, x);
  };
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      out.set(y, x, get(y, x) && get(y - 1, x) && get(y + 1, x) && get(y, x - 1) &&
                        get(y, x + 1));
  return out;
}

Mask dilate_plus(const Mask& m) {
  Mask out(m.h, m.w);
  auto get = [&](int y, int x) {
    return y >= 0 && y < m.h && x >= 0 && x < m.w && m.at(y, x);
  };
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      out.set(y, x, get(y, x) || get(y - 1, x) || get(y + 1, x) || get(y, x - 1) ||
                        get(y, x + 1));
  return out;
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  const std::streamoff len = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(len));
  if (len > 0) f.read(buf.data(), len);
  if (!f) throw IoError("cannot read file: " + path);
  return buf;
}

void write_file(const std::string& path, const void* data, std::size_t len) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open file for writing: " + path);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
  if (!f) throw IoError("cannot write file: " + path);
}

struct NetpbmHeader {
  int magic = 0;  // 5 or 6
  int w = 0, h = 0, maxval = 0;
  std::size_t payload_offset = 0;
};

NetpbmHeader parse_netpbm_header(const std::vector<char>& buf, const std::string& path) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > buf.size()) throw FormatError(path + ": truncated header", pos);
  };
  need(2);
  if (buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6'))
    throw FormatError(path + ": bad magic, expected P5 or P6", 0);
  NetpbmHeader h;
  h.magic = buf[1] - '0';
  pos = 2;
  auto next_int = [&]() -> int {
    // skip whitespace and '#' comments
    while (true) {
      need(1);
      const char c = buf[pos];
      if (c == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
    if (!std::isdigit(static_cast<unsigned char>(buf[pos])))
      throw FormatError(path + ": expected integer in header", pos);
    long value = 0;
    while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
      value = value * 10 + (buf[pos] - '0');
      if (value > 1 << 28) throw FormatError(path + ": header value too large", pos);
      ++pos;
    }
    return static_cast<int>(value);
  };
  h.w = next_int();
  h.h = next_int();
  h.maxval = next_int();
  need(1);
  ++pos;  // single whitespace byte after maxval
  if (h.maxval != 255) throw FormatError(path + ": only maxval 255 supported", pos);
  if (h.w <= 0 || h.h <= 0) throw FormatError(path + ": non-positive dimensions", pos);
  h.payload_offset = pos;
  return h;
}

std::uint8_t float_to_byte(float v) {
  const long b = std::lround(static_cast<double>(v) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(b, 0l, 255l));
}

}  // namespace

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

Image rot90_image(const Image& img, int turns) {
  Image out;
  out.c = img.c;
  std::vector<float> first;
  for (int ci = 0; ci < img.c; ++ci) {
    std::vector<float> plane(img.plane(ci), img.plane(ci) + static_cast<std::size_t>(img.h) * img.w);
    int oh = 0, ow = 0;
    auto r = rot90_plane(plane, img.h, img.w, turns, oh, ow);
    if (ci == 0) {
      out.h = oh;
      out.w = ow;
      out.v.resize(static_cast<std::size_t>(oh) * ow * img.c);
    }
    std::copy(r.begin(), r.end(), out.v.begin() + static_cast<std::size_t>(ci) * oh * ow);
  }
  return out;
}

LabelMap rot90_label_map(const LabelMap& m, int turns) {
  LabelMap out;
  int oh = 0, ow = 0;
  out.v = rot90_plane(m.v, m.h, m.w, turns, oh, ow);
  out.h = oh;
  out.w = ow;
  return out;
}

Mask rot90_mask(const Mask& m, int turns) {
  Mask out;
  int oh = 0, ow = 0;
  out.v = rot90_plane(m.v, m.h, m.w, turns, oh, ow);
  out.h = oh;
  out.w = ow;
  return out;
}

Image rotate_image(const Image& img, double angle_deg, Interp interp, float fill) {
  int turns = 0;
  if (quarter_turn(angle_deg, turns)) return rot90_image(img, turns);

  Image out(img.h, img.w, img.c);
  const InverseRotation inv(img.h, img.w, angle_deg);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      double sy, sx;
      inv.map(y, x, sy, sx);
      for (int ci = 0; ci < img.c; ++ci) {
        float val;
        if (interp == Interp::kBilinear) {
          val = sample_bilinear(img.plane(ci), img.h, img.w, sy, sx, fill);
        } else {
          const int iy = nearest_index(sy, img.h);
          const int ix = nearest_index(sx, img.w);
          val = (iy < 0 || ix < 0) ? fill : img.at(ci, iy, ix);
        }
        out.at(ci, y, x) = val;
      }
    }
  return out;
}

LabelMap rotate_label_map(const LabelMap& labels, double angle_deg) {
  int turns = 0;
  if (quarter_turn(angle_deg, turns)) return rot90_label_map(labels, turns);

  LabelMap out(labels.h, labels.w);
  const InverseRotation inv(labels.h, labels.w, angle_deg);
  for (int y = 0; y < labels.h; ++y)
    for (int x = 0; x < labels.w; ++x) {
      double sy, sx;
      inv.map(y, x, sy, sx);
      const int iy = nearest_index(sy, labels.h);
      const int ix = nearest_index(sx, labels.w);
      out.set(y, x, (iy < 0 || ix < 0) ? kIgnoreLabel : labels.at(iy, ix));
    }
  return out;
}

void resize_plane_bilinear(const float* src, int sh, int sw, float* dst, int oh, int ow) {
  const double sy_scale = static_cast<double>(sh) / oh;
  const double sx_scale = static_cast<double>(sw) / ow;
  for (int y = 0; y < oh; ++y) {
    const double sy = (y + 0.5) * sy_scale - 0.5;
    const int y0r = static_cast<int>(std::floor(sy));
    const float fy = static_cast<float>(sy - y0r);
    const int ya = std::clamp(y0r, 0, sh - 1);
    const int yb = std::clamp(y0r + 1, 0, sh - 1);
    for (int x = 0; x < ow; ++x) {
      const double sx = (x + 0.5) * sx_scale - 0.5;
      const int x0r = static_cast<int>(std::floor(sx));
      const float fx = static_cast<float>(sx - x0r);
      const int xa = std::clamp(x0r, 0, sw - 1);
      const int xb = std::clamp(x0r + 1, 0, sw - 1);
      const float a = src[static_cast<std::size_t>(ya) * sw + xa];
      const float b = src[static_cast<std::size_t>(ya) * sw + xb];
      const float c = src[static_cast<std::size_t>(yb) * sw + xa];
      const float d = src[static_cast<std::size_t>(yb) * sw + xb];
      const float wa = (1.0f - fy) * (1.0f - fx);
      const float wb = (1.0f - fy) * fx;
      const float wc = fy * (1.0f - fx);
      const float wd = fy * fx;
      dst[static_cast<std::size_t>(y) * ow + x] = (wa * a + wd * d) + (wb * b + wc * c);
    }
  }
}

namespace {

template <typename V>
void resize_plane_nearest(const V* src, int sh, int sw, V* dst, int oh, int ow) {
  const double sy_scale = static_cast<double>(sh) / oh;
  const double sx_scale = static_cast<double>(sw) / ow;
  for (int y = 0; y < oh; ++y) {
    const int iy = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy_scale - 0.5 + 0.5)), 0,
                              sh - 1);
    for (int x = 0; x < ow; ++x) {
      const int ix = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx_scale - 0.5 + 0.5)),
                                0, sw - 1);
      dst[static_cast<std::size_t>(y) * ow + x] = src[static_cast<std::size_t>(iy) * sw + ix];
    }
  }
}

}  // namespace

Image resize_image(const Image& img, int out_h, int out_w, Interp interp) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_image: non-positive target");
  Image out(out_h, out_w, img.c);
  for (int ci = 0; ci < img.c; ++ci) {
    if (interp == Interp::kBilinear)
      resize_plane_bilinear(img.plane(ci), img.h, img.w, out.plane(ci), out_h, out_w);
    else
      resize_plane_nearest(img.plane(ci), img.h, img.w, out.plane(ci), out_h, out_w);
  }
  return out;
}

LabelMap resize_label_map(const LabelMap& m, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_label_map: non-positive target");
  LabelMap out(out_h, out_w);
  resize_plane_nearest(m.v.data(), m.h, m.w, out.v.data(), out_h, out_w);
  return out;
}

Mask resize_mask(const Mask& m, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_mask: non-positive target");
  Mask out(out_h, out_w);
  resize_plane_nearest(m.v.data(), m.h, m.w, out.v.data(), out_h, out_w);
  return out;
}

Mask tissue_mask(const Image& img) {
  Mask m(img.h, img.w);
  const float inv_c = 1.0f / static_cast<float>(img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float g = 0.0f;
      for (int ci = 0; ci < img.c; ++ci) g += img.at(ci, y, x);
      m.set(y, x, g * inv_c < 0.85f);
    }
  m = dilate_plus(erode_plus(m));  // opening
  m = erode_plus(dilate_plus(m));  // closing
  return m;
}

// ---------------------------------------------------------------------------
// netpbm
// ---------------------------------------------------------------------------

Image read_image(const std::string& path) {
  const auto buf = read_file(path);
  const NetpbmHeader h = parse_netpbm_header(buf, path);
  const int channels = h.magic == 5 ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(h.h) * h.w * channels;
  if (buf.size() - h.payload_offset < need)
    throw FormatError(path + ": truncated payload", buf.size());
  Image img(h.h, h.w, channels);
  const auto* p = reinterpret_cast<const std::uint8_t*>(buf.data() + h.payload_offset);
  for (int y = 0; y < h.h; ++y)
    for (int x = 0; x < h.w; ++x)
      for (int ci = 0; ci < channels; ++ci)
        img.at(ci, y, x) =
            static_cast<float>(p[(static_cast<std::size_t>(y) * h.w + x) * channels + ci]) / 255.0f;
  return img;
}

void write_image(const std::string& path, const Image& img) {
  if (img.c != 1 && img.c != 3) throw std::invalid_argument("write_image: 1 or 3 channels only");
  std::string header = (img.c == 1 ? std::string("P5\n") : std::string("P6\n")) +
                       std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.size() + static_cast<std::size_t>(img.h) * img.w * img.c);
  std::memcpy(out.data(), header.data(), header.size());
  std::uint8_t* p = out.data() + header.size();
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ci = 0; ci < img.c; ++ci) *p++ = float_to_byte(img.at(ci, y, x));
  write_file(path, out.data(), out.size());
}

LabelMap read_label_map(const std::string& path) {
  const auto buf = read_file(path);
  const NetpbmHeader h = parse_netpbm_header(buf, path);
  if (h.magic != 5) throw FormatError(path + ": label maps must be P5", 1);
  const std::size_t need = static_cast<std::size_t>(h.h) * h.w;
  if (buf.size() - h.payload_offset < need)
    throw FormatError(path + ": truncated payload", buf.size());
  LabelMap m(h.h, h.w);
  const auto* p = reinterpret_cast<const std::uint8_t*>(buf.data() + h.payload_offset);
  for (std::size_t i = 0; i < need; ++i) m.v[i] = p[i];
  return m;
}

void write_label_map(const std::string& path, const LabelMap& m) {
  std::string header = "P5\n" + std::to_string(m.w) + " " + std::to_string(m.h) + "\n255\n";
  std::vector<std::uint8_t> out(header.size() + m.v.size());
  std::memcpy(out.data(), header.data(), header.size());
  std::uint8_t* p = out.data() + header.size();
  for (int label : m.v) {
    if (label < 0 || label > 255)
      throw std::invalid_argument("write_label_map: label outside byte range");
    *p++ = static_cast<std::uint8_t>(label);
  }
  write_file(path, out.data(), out.size());
}

Mask read_mask(const std::string& path) {
  LabelMap m = read_label_map(path);
  Mask out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] != 0 ? 1 : 0;
  return out;
}

void write_mask(const std::string& path, const Mask& m) {
  LabelMap lm(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) lm.v[i] = m.v[i] ? 255 : 0;
  write_label_map(path, lm);
}

// ---------------------------------------------------------------------------
// TensorFile
// ---------------------------------------------------------------------------

void write_tensor_file(const std::string& path, const std::vector<std::uint64_t>& dims,
                       const float* data) {
  std::uint64_t count = 1;
  for (auto d : dims) count *= d;
  std::vector<std::uint8_t> buf;
  buf.reserve(8 + dims.size() * 8 + count * 4);
  const char magic[4] = {'S', 'R', 'E', 'T'};
  buf.insert(buf.end(), magic, magic + 4);
  const std::uint16_t version = 1;
  const std::uint16_t rank = static_cast<std::uint16_t>(dims.size());
  buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&version),
             reinterpret_cast<const std::uint8_t*>(&version) + 2);
  buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&rank),
             reinterpret_cast<const std::uint8_t*>(&rank) + 2);
  for (auto d : dims)
    buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(&d),
               reinterpret_cast<const std::uint8_t*>(&d) + 8);
  buf.insert(buf.end(), reinterpret_cast<const std::uint8_t*>(data),
             reinterpret_cast<const std::uint8_t*>(data) + count * 4);
  write_file(path, buf.data(), buf.size());
}

TensorFileData read_tensor_file(const std::string& path) {
  const auto buf = read_file(path);
  if (buf.size() < 8) throw FormatError(path + ": truncated TensorFile header", buf.size());
  if (std::memcmp(buf.data(), "SRET", 4) != 0)
    throw FormatError(path + ": bad TensorFile magic", 0);
  std::uint16_t version, rank;
  std::memcpy(&version, buf.data() + 4, 2);
  std::memcpy(&rank, buf.data() + 6, 2);
  if (version != 1) throw FormatError(path + ": unsupported TensorFile version", 4);
  std::size_t pos = 8;
  if (buf.size() < pos + static_cast<std::size_t>(rank) * 8)
    throw FormatError(path + ": truncated TensorFile dims", buf.size());
  TensorFileData out;
  out.dims.resize(rank);
  std::uint64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    std::memcpy(&out.dims[i], buf.data() + pos, 8);
    pos += 8;
    count *= out.dims[i];
  }
  if (buf.size() - pos < count * 4)
    throw FormatError(path + ": truncated TensorFile payload", buf.size());
  out.data.resize(count);
  std::memcpy(out.data.data(), buf.data() + pos, count * 4);
  return out;
}

Tensor<float> image_to_tensor(const Image& img) {
  Tensor<float> t(1, img.c, img.h, img.w);
  std::copy(img.v.begin(), img.v.end(), t.v.begin());
  return t;
}

Image tensor_to_image(const Tensor<float>& t, int n_index) {
  Image img(t.h, t.w, t.c);
  const float* src = t.v.data() + static_cast<std::size_t>(n_index) * t.c * t.h * t.w;
  std::copy(src, src + img.v.size(), img.v.begin());
  return img;
}

}  // namespace sre
