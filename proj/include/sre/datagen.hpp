#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sre/imaging.hpp"
#include "sre/model.hpp"

namespace sre {

// Isotropic texture family: class identity is carried by rotation-invariant
// statistics (splat density and size, band-pass scale, smooth-noise scale),
// never by orientation.
enum class TextureKind { kCoarseBlobs = 0, kFineSpots = 1, kRipples = 2, kClouds = 3 };

struct TextureSpec {
  TextureKind kind = TextureKind::kCoarseBlobs;
  double base = 0.9;       // background gray inside the tissue
  double density = 0.002;  // splats per pixel (splat kinds)
  double sigma_lo = 3.0, sigma_hi = 5.0;
  double amp_lo = 0.5, amp_hi = 0.85;
  double noise_scale = 2.0;  // blur scale (noise kinds)
  double contrast = 0.13;    // gray std target (noise kinds)
};

TextureSpec texture_for_class(int class_id, Rng& rng);

// Full-canvas stationary gray texture in [0,1].
std::vector<float> render_texture(const TextureSpec& spec, int size, Rng& rng);

struct ClassificationSet {
  LabeledImages train;
  LabeledImages test;
};

// Textured discs on white background; class c = index mod classes. Train and
// test draw from disjoint RNG streams. Samples are quantized to 8 bits so
// in-memory data matches the PPM files bit for bit.
ClassificationSet gen_classification_set(std::uint64_t seed, int classes = 4,
                                         int n_train = 2000, int n_test = 500, int size = 64);

struct SyntheticTma {
  std::string id;
  std::string split;  // "train" | "test"
  int regions = 0;
  std::uint64_t seed = 0;
  Image image;
  LabelMap ground_truth;  // region index inside the disc, IGNORE outside
};

// Inscribed disc partitioned into 2..4 angular/radial regions, each filled
// with a distinct texture; white exterior. First half train, second test.
std::vector<SyntheticTma> gen_tma_cohort(std::uint64_t seed, int n_subjects = 20, int size = 512);

}  // namespace sre
