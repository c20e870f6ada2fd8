#include "sre/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sre {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void gaussian_blur_inplace(std::vector<float>& plane, int size, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    total += kernel[i + radius];
  }
  for (auto& k : kernel) k = static_cast<float>(k / total);

  auto reflect = [&](int i) {
    if (i < 0) i = -i - 1;
    if (i >= size) i = 2 * size - i - 1;
    return i;
  };

  std::vector<float> tmp(plane.size());
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * plane[static_cast<std::size_t>(y) * size + reflect(x + i)];
      tmp[static_cast<std::size_t>(y) * size + x] = acc;
    }
  for (int x = 0; x < size; ++x)
    for (int y = 0; y < size; ++y) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp[static_cast<std::size_t>(reflect(y + i)) * size + x];
      plane[static_cast<std::size_t>(y) * size + x] = acc;
    }
}

void normalize_plane(std::vector<float>& plane) {
  double mean = 0.0;
  for (float v : plane) mean += v;
  mean /= plane.size();
  double var = 0.0;
  for (float v : plane) {
    const double d = v - mean;
    var += d * d;
  }
  var /= plane.size();
  const double inv = var > 1e-20 ? 1.0 / std::sqrt(var) : 0.0;
  for (auto& v : plane) v = static_cast<float>((v - mean) * inv);
}

std::vector<float> white_noise(int size, Rng& rng) {
  std::vector<float> plane(static_cast<std::size_t>(size) * size);
  for (auto& v : plane) v = static_cast<float>(rng.uniform());
  return plane;
}

void splat_texture(std::vector<float>& gray, int size, const TextureSpec& spec, Rng& rng) {
  const double area = static_cast<double>(size) * size;
  const int count = static_cast<int>(std::lround(spec.density * area));
  for (int b = 0; b < count; ++b) {
    const double cy = rng.uniform() * size;
    const double cx = rng.uniform() * size;
    const double sigma = rng.uniform(spec.sigma_lo, spec.sigma_hi);
    const double amp = rng.uniform(spec.amp_lo, spec.amp_hi);
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy)) - radius);
    const int y1 = std::min(size - 1, static_cast<int>(std::floor(cy)) + radius);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx)) - radius);
    const int x1 = std::min(size - 1, static_cast<int>(std::floor(cx)) + radius);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        gray[static_cast<std::size_t>(y) * size + x] -=
            static_cast<float>(amp * std::exp(-r2 * inv2s2));
      }
  }
}

}  // namespace

TextureSpec texture_for_class(int class_id, Rng& rng) {
  TextureSpec s;
  s.kind = static_cast<TextureKind>(class_id % 4);
  const double dj = rng.uniform(0.9, 1.1);   // density jitter
  const double bj = rng.uniform(-0.015, 0.015);
  switch (s.kind) {
    case TextureKind::kCoarseBlobs:
      s.base = 0.95 + bj;
      s.density = 0.0022 * dj;
      s.sigma_lo = 3.0;
      s.sigma_hi = 5.0;
      s.amp_lo = 0.55;
      s.amp_hi = 0.9;
      break;
    case TextureKind::kFineSpots:
      s.base = 0.97 + bj;
      s.density = 0.011 * dj;
      s.sigma_lo = 1.6;
      s.sigma_hi = 2.2;
      s.amp_lo = 0.45;
      s.amp_hi = 0.8;
      break;
    case TextureKind::kRipples:
      s.base = 0.62 + bj;
      s.noise_scale = 1.8 * dj;
      s.contrast = 0.13;
      break;
    case TextureKind::kClouds:
      s.base = 0.52 + bj;
      s.noise_scale = 5.0 * dj;
      s.contrast = 0.12;
      break;
  }
  return s;
}

std::vector<float> render_texture(const TextureSpec& spec, int size, Rng& rng) {
  std::vector<float> gray;
  switch (spec.kind) {
    case TextureKind::kCoarseBlobs:
    case TextureKind::kFineSpots: {
      gray.assign(static_cast<std::size_t>(size) * size, static_cast<float>(spec.base));
      splat_texture(gray, size, spec, rng);
      break;
    }
    case TextureKind::kRipples: {
      gray = white_noise(size, rng);
      std::vector<float> wide = gray;
      gaussian_blur_inplace(gray, size, spec.noise_scale);
      gaussian_blur_inplace(wide, size, spec.noise_scale * 2.0);
      for (std::size_t i = 0; i < gray.size(); ++i) gray[i] -= wide[i];
      normalize_plane(gray);
      for (auto& v : gray)
        v = static_cast<float>(spec.base + spec.contrast * v);
      break;
    }
    case TextureKind::kClouds: {
      gray = white_noise(size, rng);
      gaussian_blur_inplace(gray, size, spec.noise_scale);
      normalize_plane(gray);
      for (auto& v : gray)
        v = static_cast<float>(spec.base + spec.contrast * v);
      break;
    }
  }
  for (auto& v : gray) v = std::clamp(v, 0.0f, 1.0f);
  return gray;
}

namespace {

// Single H&E-like tint shared by all classes, so color never identifies the
// class; subtle per-image jitter keeps the cohort from being uniform.
void gray_to_rgb(const std::vector<float>& gray, const std::vector<char>& inside, int size,
                 double tint_jitter, Image& img) {
  const float fr = static_cast<float>(0.45 + tint_jitter);
  const float fg = static_cast<float>(0.85 + tint_jitter);
  const float fb = static_cast<float>(0.62 + tint_jitter);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * size + x;
      const float g = inside[i] ? gray[i] : 1.0f;
      const float ink = 1.0f - g;
      img.at(0, y, x) = 1.0f - ink * fr;
      img.at(1, y, x) = 1.0f - ink * fg;
      img.at(2, y, x) = 1.0f - ink * fb;
    }
}

void quantize_image(Image& img) {
  for (auto& v : img.v)
    v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
}

std::vector<char> disc_mask(int size, double radius) {
  std::vector<char> inside(static_cast<std::size_t>(size) * size, 0);
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      inside[static_cast<std::size_t>(y) * size + x] =
          ((y - c) * (y - c) + (x - c) * (x - c) <= radius * radius) ? 1 : 0;
  return inside;
}

}  // namespace

ClassificationSet gen_classification_set(std::uint64_t seed, int classes, int n_train,
                                         int n_test, int size) {
  if (classes < 2 || classes > 4) throw std::invalid_argument("gen_classification_set: classes in 2..4");
  if (n_train < 1 || n_test < 1 || size < 16)
    throw std::invalid_argument("gen_classification_set: bad sizes");

  auto make_split = [&](const char* split, int count) {
    LabeledImages out;
    out.images = Tensor<float>(count, 3, size, size);
    out.labels.resize(count);
    const double radius = size / 2.0 - 1.0;
    const auto inside = disc_mask(size, radius);
    for (int i = 0; i < count; ++i) {
      const int cls = i % classes;
      Rng rng(seed_for(seed, std::string("cls-") + split, static_cast<std::uint64_t>(i)));
      TextureSpec spec = texture_for_class(cls, rng);
      const auto gray = render_texture(spec, size, rng);
      Image img(size, size, 3);
      gray_to_rgb(gray, inside, size, rng.uniform(-0.03, 0.03), img);
      quantize_image(img);
      std::copy(img.v.begin(), img.v.end(),
                out.images.v.begin() + static_cast<std::size_t>(i) * 3 * size * size);
      out.labels[i] = cls;
    }
    return out;
  };

  ClassificationSet set;
  set.train = make_split("train", n_train);
  set.test = make_split("test", n_test);
  return set;
}

namespace {

struct RegionLayout {
  int regions = 0;
  int style = 0;          // 0 sectors, 1 rings, 2 inner disc + outer sectors
  double start_angle = 0.0;
  std::vector<double> widths;  // sector widths (styles 0 and 2)
  std::vector<double> radii;   // cut radii (styles 1 and 2)
};

RegionLayout draw_layout(Rng& rng, double disc_radius) {
  RegionLayout lay;
  lay.regions = 2 + static_cast<int>(rng.below(3));
  lay.style = static_cast<int>(rng.below(3));
  if (lay.regions == 2 && lay.style == 2) lay.style = 0;

  const int sectors = lay.style == 0 ? lay.regions
                     : lay.style == 2 ? lay.regions - 1
                                      : 0;
  if (sectors > 0) {
    lay.start_angle = rng.uniform() * kTwoPi;
    double total = 0.0;
    for (int i = 0; i < sectors; ++i) {
      lay.widths.push_back(rng.uniform() + 0.5);
      total += lay.widths.back();
    }
    for (auto& w : lay.widths) w *= kTwoPi / total;
  }
  if (lay.style == 1) {
    const int cuts = lay.regions - 1;
    for (int i = 0; i < cuts; ++i) {
      const double lo = (i + 0.7) / (cuts + 1.0);
      const double hi = (i + 1.3) / (cuts + 1.0);
      lay.radii.push_back(disc_radius * rng.uniform(lo, hi));
    }
  } else if (lay.style == 2) {
    lay.radii.push_back(disc_radius * rng.uniform(0.42, 0.58));
  }
  return lay;
}

int region_of(const RegionLayout& lay, double dy, double dx, double disc_radius) {
  const double r = std::sqrt(dy * dy + dx * dx);
  if (r > disc_radius) return kIgnoreLabel;
  double theta = std::atan2(dy, dx);
  if (theta < 0) theta += kTwoPi;

  auto sector_of = [&](int sectors) {
    double rel = theta - lay.start_angle;
    while (rel < 0) rel += kTwoPi;
    while (rel >= kTwoPi) rel -= kTwoPi;
    double acc = 0.0;
    for (int i = 0; i < sectors; ++i) {
      acc += lay.widths[i];
      if (rel < acc) return i;
    }
    return sectors - 1;
  };

  switch (lay.style) {
    case 0:
      return sector_of(lay.regions);
    case 1: {
      for (std::size_t i = 0; i < lay.radii.size(); ++i)
        if (r <= lay.radii[i]) return static_cast<int>(i);
      return lay.regions - 1;
    }
    default: {  // inner disc + outer sectors
      if (r <= lay.radii[0]) return 0;
      return 1 + sector_of(lay.regions - 1);
    }
  }
}

}  // namespace

std::vector<SyntheticTma> gen_tma_cohort(std::uint64_t seed, int n_subjects, int size) {
  if (n_subjects < 1 || size < 64) throw std::invalid_argument("gen_tma_cohort: bad arguments");
  std::vector<SyntheticTma> cohort;
  cohort.reserve(n_subjects);
  const double disc_radius = 0.47 * size;
  const double c = (size - 1) / 2.0;

  for (int s = 0; s < n_subjects; ++s) {
    SyntheticTma subj;
    subj.seed = seed_for(seed, "tma-subject", static_cast<std::uint64_t>(s));
    Rng rng(subj.seed);
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%02d", s);
    subj.id = idbuf;
    subj.split = s < n_subjects / 2 ? "train" : "test";

    const RegionLayout lay = draw_layout(rng, disc_radius);
    subj.regions = lay.regions;

    // distinct texture kinds per region
    std::vector<int> kinds{0, 1, 2, 3};
    for (int i = 3; i > 0; --i)
      std::swap(kinds[i], kinds[rng.below(static_cast<std::uint64_t>(i) + 1)]);

    std::vector<std::vector<float>> canvases;
    for (int r = 0; r < lay.regions; ++r) {
      TextureSpec spec = texture_for_class(kinds[r], rng);
      canvases.push_back(render_texture(spec, size, rng));
    }

    std::vector<float> gray(static_cast<std::size_t>(size) * size, 1.0f);
    std::vector<char> inside(static_cast<std::size_t>(size) * size, 0);
    subj.ground_truth = LabelMap(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int region = region_of(lay, y - c, x - c, disc_radius);
        if (region == kIgnoreLabel) continue;
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        inside[i] = 1;
        gray[i] = canvases[region][i];
        subj.ground_truth.set(y, x, region);
      }

    subj.image = Image(size, size, 3);
    gray_to_rgb(gray, inside, size, rng.uniform(-0.03, 0.03), subj.image);
    quantize_image(subj.image);
    cohort.push_back(std::move(subj));
  }
  return cohort;
}

}  // namespace sre
