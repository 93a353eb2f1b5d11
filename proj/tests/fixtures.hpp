#pragma once

// Shared fixtures: a small detector geometry matched to the procedural
// phantom, and the nominal AP pose the registration tests perturb from.

#include "fregi/landmarks.hpp"
#include "fregi/phantom.hpp"
#include "fregi/projector.hpp"

namespace fregi::testfix {

inline ProjectionGeometry small_geometry(int dim = 64, double pixel_mm = 4.0) {
  ProjectionGeometry g;
  g.source_to_detector = 1020.0;
  g.rows = dim;
  g.cols = dim;
  g.pixel_spacing = Vec2(pixel_mm, pixel_mm);
  g.principal_point = Vec2(0.5 * (dim - 1), 0.5 * (dim - 1));
  return g;
}

// One shared phantom per process; building it is the expensive part.
inline const Scene& shared_scene() {
  static const Scene scene = build_phantom();
  return scene;
}

inline MultiBodyPose ap_pose(const Scene& scene, const ProjectionGeometry& g,
                             double depth_ratio = 0.75) {
  const LandmarkMap3 lms = scene.all_landmarks();
  const AppFrame app = compute_app_frame(lms);
  return MultiBodyPose::uniform(init_ap_centroid(lms, app, g, depth_ratio));
}

}  // namespace fregi::testfix
