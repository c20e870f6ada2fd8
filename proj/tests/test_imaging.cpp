#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sre/datagen.hpp"
#include "sre/imaging.hpp"

using namespace sre;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

// Independent bilinear rotator: forward formula written separately from the
// library (no shared sampling helpers), used as the resampling oracle.
Image reference_rotate(const Image& img, double angle_deg, float fill) {
  const double rad = angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (img.h - 1) / 2.0, cx = (img.w - 1) / 2.0;
  Image out(img.h, img.w, img.c);
  for (int ci = 0; ci < img.c; ++ci)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        const double dy = y - cy, dx = x - cx;
        const double sy = cy + cs * dy + sn * dx;
        const double sx = cx - sn * dy + cs * dx;
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        const double fy = sy - y0, fx = sx - x0;
        double acc = 0.0;
        for (int oy = 0; oy <= 1; ++oy)
          for (int ox = 0; ox <= 1; ++ox) {
            const double w = (oy ? fy : 1.0 - fy) * (ox ? fx : 1.0 - fx);
            const int yy = y0 + oy, xx = x0 + ox;
            const double v = (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w)
                                 ? fill
                                 : img.at(ci, yy, xx);
            acc += w * v;
          }
        out.at(ci, y, x) = static_cast<float>(acc);
      }
  return out;
}

Image smooth_test_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  TextureSpec spec;
  spec.kind = TextureKind::kClouds;
  spec.base = 0.5;
  spec.noise_scale = 4.0;
  spec.contrast = 0.2;
  auto gray = render_texture(spec, size, rng);
  Image img(size, size, 1);
  img.v = gray;
  return img;
}

}  // namespace

TEST_CASE("rotate_image exact dispatch at quarter turns") {
  Image img = smooth_test_image(32, 1);
  Image r0 = rotate_image(img, 0.0, Interp::kBilinear, 1.0f);
  CHECK(r0.v == img.v);

  Image r90 = rotate_image(img, 90.0, Interp::kBilinear, 1.0f);
  Image p90 = rot90_image(img, 1);
  CHECK(r90.v == p90.v);

  Image r360 = rotate_image(img, 360.0, Interp::kNearest, 0.0f);
  CHECK(r360.v == img.v);

  Image r180 = rotate_image(img, 180.0, Interp::kBilinear, 1.0f);
  CHECK(r180.v == rot90_image(img, 2).v);
}

TEST_CASE("rotate(rotate(img, 30), -30) has small error on the inscribed disc") {
  const int size = 64;
  Image img = smooth_test_image(size, 2);
  Image ours = rotate_image(rotate_image(img, 30.0, Interp::kBilinear, 1.0f), -30.0,
                            Interp::kBilinear, 1.0f);
  Image ref = reference_rotate(reference_rotate(img, 30.0, 1.0f), -30.0, 1.0f);

  const double c = (size - 1) / 2.0;
  const double radius = size / 2.0 - 3.0;
  double mae_ours = 0.0, mae_ref = 0.0;
  int count = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if ((y - c) * (y - c) + (x - c) * (x - c) > radius * radius) continue;
      mae_ours += std::abs(ours.at(0, y, x) - img.at(0, y, x));
      mae_ref += std::abs(ref.at(0, y, x) - img.at(0, y, x));
      ++count;
    }
  mae_ours /= count;
  mae_ref /= count;
  CHECK(mae_ours <= 0.02);  // 5.1 on the 8-bit scale
  CHECK(mae_ref <= 0.02);
  CHECK(std::abs(mae_ours - mae_ref) <= 0.005);
}

TEST_CASE("rotate_label_map basics") {
  LabelMap m(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) m.set(y, x, (y < 3) ? 1 : 2);

  CHECK(rotate_label_map(m, 0.0).v == m.v);
  LabelMap twice = rotate_label_map(rotate_label_map(m, 180.0), 180.0);
  CHECK(twice.v == m.v);

  LabelMap constant(8, 8);
  for (auto& v : constant.v) v = 3;
  LabelMap rot = rotate_label_map(constant, 30.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      if (rot.at(y, x) != kIgnoreLabel) CHECK(rot.at(y, x) == 3);
  // out-of-frame corners become IGNORE
  int ignored = 0;
  for (int v : rot.v) ignored += v == kIgnoreLabel;
  CHECK(ignored > 0);
}

TEST_CASE("resize basics and quarter-turn commutation") {
  Image img = smooth_test_image(64, 3);

  // nearest 64 -> 128 doubles each pixel into a 2x2 block
  Image up = resize_image(img, 128, 128, Interp::kNearest);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int oy = 0; oy < 2; ++oy)
        for (int ox = 0; ox < 2; ++ox)
          CHECK(up.at(0, 2 * y + oy, 2 * x + ox) == img.at(0, y, x));

  // same-size nearest resize is the identity
  CHECK(resize_image(img, 64, 64, Interp::kNearest).v == img.v);

  // rot90 and resize commute for square targets, both interps
  for (Interp interp : {Interp::kNearest, Interp::kBilinear}) {
    Image a = rot90_image(resize_image(img, 128, 128, interp), 1);
    Image b = resize_image(rot90_image(img, 1), 128, 128, interp);
    CHECK(a.v == b.v);
  }
  // integer 2x nearest upsampling of label maps commutes exactly too
  LabelMap m(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) m.set(y, x, (x + 2 * y) % 5);
  CHECK(rot90_label_map(resize_label_map(m, 32, 32), 1).v ==
        resize_label_map(rot90_label_map(m, 1), 32, 32).v);
}

TEST_CASE("tissue_mask thresholds and cleans up") {
  Image white(32, 32, 3);
  white.v.assign(white.v.size(), 1.0f);
  CHECK(tissue_mask(white).count() == 0);

  // dark disc on white, plus one isolated dark pixel that opening removes
  Image img(64, 64, 3);
  img.v.assign(img.v.size(), 1.0f);
  const double c = 31.5;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if ((y - c) * (y - c) + (x - c) * (x - c) <= 20.0 * 20.0)
        for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = 0.3f;
  for (int ch = 0; ch < 3; ++ch) img.at(ch, 2, 2) = 0.0f;

  Mask m = tissue_mask(img);
  CHECK_FALSE(m.at(2, 2));       // isolated pixel opened away
  CHECK(m.at(32, 32));           // disc interior kept
  CHECK_FALSE(m.at(0, 63));      // background stays out
  const int disc_area = static_cast<int>(3.14159 * 20 * 20);
  CHECK(m.count() > disc_area * 0.9);
  CHECK(m.count() < disc_area * 1.1);

  // exact quarter-turn commutation
  Mask lhs = rot90_mask(tissue_mask(img), 1);
  Mask rhs = tissue_mask(rot90_image(img, 1));
  CHECK(lhs.v == rhs.v);
}

TEST_CASE("PGM/PPM round trips and the canonical 2x2 fixture") {
  Image img(2, 2, 1);
  img.v = {0.0f, 85.0f / 255.0f, 170.0f / 255.0f, 1.0f};
  const std::string path = tmp_path("sre_fixture.pgm");
  write_image(path, img);

  std::ifstream f(path, std::ios::binary);
  std::string contents((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(contents.size() == header.size() + 4);
  CHECK(contents.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(contents[header.size() + 0]) == 0);
  CHECK(static_cast<unsigned char>(contents[header.size() + 1]) == 85);
  CHECK(static_cast<unsigned char>(contents[header.size() + 2]) == 170);
  CHECK(static_cast<unsigned char>(contents[header.size() + 3]) == 255);

  CHECK(read_image(path).v == img.v);

  // color round trip on quantized data
  Rng rng(9);
  Image color(5, 7, 3);
  for (auto& v : color.v) v = static_cast<float>(std::lround(rng.uniform() * 255.0) / 255.0);
  const std::string cpath = tmp_path("sre_fixture.ppm");
  write_image(cpath, color);
  CHECK(read_image(cpath).v == color.v);

  // label map round trip with IGNORE
  LabelMap lm(3, 3);
  lm.set(1, 1, 2);
  lm.set(0, 0, 0);
  const std::string lpath = tmp_path("sre_fixture_labels.pgm");
  write_label_map(lpath, lm);
  CHECK(read_label_map(lpath).v == lm.v);
}

TEST_CASE("malformed netpbm input never yields a value") {
  const std::string path = tmp_path("sre_bad.pgm");
  {
    std::ofstream f(path, std::ios::binary);
    f << "P5\n4 4\n255\n";
    f.put(0);  // payload truncated
  }
  CHECK_THROWS_AS(read_image(path), FormatError);
  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "Q5\n2 2\n255\n????";
  }
  CHECK_THROWS_AS(read_image(path), FormatError);
  CHECK_THROWS_AS(read_image(tmp_path("sre_does_not_exist.pgm")), IoError);
}

TEST_CASE("TensorFile round trip and error reporting") {
  Rng rng(10);
  std::vector<float> data(24);
  for (auto& v : data) v = static_cast<float>(rng.gaussian());
  const std::string path = tmp_path("sre_tensor.srt");
  write_tensor_file(path, {2, 3, 4}, data.data());
  TensorFileData back = read_tensor_file(path);
  CHECK(back.dims == std::vector<std::uint64_t>{2, 3, 4});
  CHECK(back.data == data);

  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f << "NOPE";
  }
  try {
    read_tensor_file(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }

  write_tensor_file(path, {2, 3, 4}, data.data());
  {
    // truncate the payload
    fs::resize_file(path, 8 + 3 * 8 + 10);
  }
  CHECK_THROWS_AS(read_tensor_file(path), FormatError);
}

TEST_CASE("image/tensor conversions") {
  Image img = smooth_test_image(16, 4);
  Tensor<float> t = image_to_tensor(img);
  CHECK(t.n == 1);
  CHECK(t.c == 1);
  CHECK(t.h == 16);
  Image back = tensor_to_image(t);
  CHECK(back.v == img.v);
}
