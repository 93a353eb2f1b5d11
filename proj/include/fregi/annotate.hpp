#pragma once

#include "fregi/geometry.hpp"
#include "fregi/imaging.hpp"
#include "fregi/landmarks.hpp"
#include "fregi/projector.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace fregi {

// Projected ground truth for one image: label map, 2D landmarks with
// visibility, per-landmark heatmaps, and the provenance needed to reproduce
// them.
struct AnnotationSet {
  LabelImage2D labels;
  LandmarkMap2 landmarks;
  std::vector<Heatmap> heatmaps;  // one per landmark, ordered by name

  MultiBodyPose pose;
  ProjectionGeometry geometry;
  double sigma_px = 2.5;
  std::uint64_t seed = 0;

  const Heatmap* find_heatmap(const std::string& name) const;
};

// Projects labels, landmarks, and heatmaps at the ground-truth pose.  Heatmap
// means snap to the landmark's nearest raster pixel so that the extraction
// template, which is centered on a pixel, can align exactly; the stored 2D
// landmark keeps its real-valued projection.
AnnotationSet generate_annotations(const Scene& scene, const ProjectionGeometry& g,
                                   const MultiBodyPose& gt_pose, double sigma_px = 2.5);

struct AugmentParams {
  double invert_prob = 0.5;
  double noise_sigma_lo = 0.005, noise_sigma_hi = 0.01;  // fraction of intensity range
  double gamma_lo = 0.7, gamma_hi = 1.3;
  double translate_px_max = 20.0;
  double rotate_deg_max = 5.0;
  double shear_deg_max = 2.0;
  double scale_lo = 0.9, scale_hi = 1.1;
  double corrupt_prob = 0.25;
  int corrupt_regions_max = 5;          // count uniform over {1..max}
  double corrupt_dim_frac = 0.15;       // region dims ~ N(d, d), d = frac * width
  double corrupt_noise_frac = 0.2;      // noise sigma = frac * region intensity range
};

// Augmentation pipeline in fixed order: intensity inversion, additive noise,
// gamma correction, affine warp (reflection padding), local corruption.  The
// same warp moves labels (nearest neighbor), landmark coordinates, and
// heatmaps; landmarks warped off the detector become invisible with zeroed
// heatmaps.  Deterministic given seed.
std::pair<Image2D, AnnotationSet> augment(const Image2D& img, const AnnotationSet& ann,
                                          const AugmentParams& params,
                                          std::uint64_t seed);

// Row/col affine map used by augment; exposed so tests can transform points
// with the exact warp the image saw.
struct AffineWarp {
  Mat2 linear = Mat2::Identity();
  Vec2 offset{0.0, 0.0};  // applied after the linear part about the center
  Vec2 center{0.0, 0.0};

  Vec2 apply(const Vec2& p) const { return linear * (p - center) + center + offset; }
  Vec2 invert(const Vec2& q) const {
    return linear.inverse() * (q - center - offset) + center;
  }
};

// Dataset directory layout: image.{json,raw}, labels.{json,raw},
// landmarks.json, heatmaps.{json,raw}, provenance.json.
void write_annotation_bundle(const std::filesystem::path& dir, const Image2D& image,
                             const AnnotationSet& ann);
std::pair<Image2D, AnnotationSet> read_annotation_bundle(const std::filesystem::path& dir);

}  // namespace fregi
