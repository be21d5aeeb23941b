#pragma once

#include <random>

#include "boxcorner/train/scene.hpp"

namespace boxc {

struct AugmentConfig {
  double rotate_box_prob = 0.0;
  double occlude_prob = 0.0;
  double max_occlusion = 0.3;  // fraction of the query silhouette area
  double noise_prob = 0.0;
  double noise_std = 6.0;      // in 8-bit intensity units
  double blur_prob = 0.0;
  double background_prob = 0.0;

  static AugmentConfig none() { return {}; }
  static AugmentConfig training();
};

// Applies the configured augmentations. With every probability at zero the
// scene is returned unchanged and rng is not advanced.
Scene augment_sample(const Scene& scene, std::mt19937_64& rng, const AugmentConfig& config);

// Paints a rectangle grown from a random side of the silhouette's bounding
// box until it covers `fraction` of the silhouette pixels. Returns the covered
// fraction.
double apply_occluder(View& view, double fraction, std::mt19937_64& rng);

void add_pixel_noise(Image& img, double stddev, std::mt19937_64& rng);
void apply_motion_blur(Image& img, std::mt19937_64& rng);
void composite_background(View& view, std::mt19937_64& rng);

}  // namespace boxc
