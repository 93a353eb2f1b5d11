#pragma once

#include "fregi/geometry.hpp"
#include "fregi/imaging.hpp"
#include "fregi/projector.hpp"

#include <string>
#include <vector>

namespace fregi {

struct Heatmap {
  std::string name;
  Image2D values;
};

// Unit-integral symmetric Gaussian centered on the landmark pixel, zero
// everywhere when the landmark is invisible.
Heatmap make_heatmap(const Landmark2D& lm, int rows, int cols, double sigma_px = 2.5,
                     const std::string& name = {});

struct Detection {
  std::string name;
  Vec2 pixel{0.0, 0.0};  // (row, col)
  double template_ncc = 0.0;
  bool detected = false;
};

// Landmark extraction: per heatmap, candidates are restricted to pixels whose
// label matches the landmark's owning class; the masked argmax is matched
// against a Gaussian template over a region x region window (both truncated
// identically at borders) and reported as detected when NCC > threshold.
std::vector<Detection> extract_landmarks(const std::vector<Heatmap>& heatmaps,
                                         const LabelImage2D& lbl, int region = 25,
                                         double threshold = 0.9,
                                         double sigma_px = 2.5);

LandmarkMap2 detections_to_landmarks(const std::vector<Detection>& dets);

struct PnpCorrespondence {
  Vec3 point3d;  // anatomy mm
  Vec2 pixel;    // (row, col)
};

// Pose from >= 4 2D/3D correspondences: damped least squares over se(3)
// minimizing squared detector-plane reprojection distances in mm, starting
// from init.  Throws std::invalid_argument for < 4 correspondences.
RigidPose solve_pnp(const std::vector<PnpCorrespondence>& corr,
                    const ProjectionGeometry& g, const RigidPose& init);

// Landmark preference for single-landmark initialization, most preferred
// first.
const std::vector<std::string>& init_landmark_preference();

// First preference-order landmark present and detected in det2d; throws when
// none is available.
std::string select_init_landmark(const LandmarkMap2& det2d);

// Nominal AP pose construction: orientation chosen so that the anterior
// pelvic plane is parallel to the detector with the patient superior
// direction toward smaller rows; depth chosen so the ASIS/SPS centroid sits
// at depth_ratio of the source-to-detector distance; in-plane translation
// chosen so anchor3d (anatomy mm) projects exactly to anchor_px.
RigidPose init_ap_pose(const LandmarkMap3& lms3d, const AppFrame& app,
                       const ProjectionGeometry& g, const Vec3& anchor3d,
                       const Vec2& anchor_px, double depth_ratio = 0.7);

// Variant aligning the ASIS/SPS centroid with the image center.
RigidPose init_ap_centroid(const LandmarkMap3& lms3d, const AppFrame& app,
                           const ProjectionGeometry& g, double depth_ratio = 0.7);

// Variant anchoring the most-preferred detected landmark to its detection.
RigidPose init_ap_single_landmark(const LandmarkMap3& lms3d, const LandmarkMap2& det2d,
                                  const AppFrame& app, const ProjectionGeometry& g,
                                  double depth_ratio = 0.7);

}  // namespace fregi
