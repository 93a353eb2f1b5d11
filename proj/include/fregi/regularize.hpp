#pragma once

#include "fregi/geometry.hpp"
#include "fregi/projector.hpp"

namespace fregi {

struct RegWeights {
  double lambda = 0.9;      // similarity/regularizer mix; 1 disables the prior
  double sigma_l_mm = 19.4;  // reprojection prior scale, detector mm
  Vec6 euler_sigmas{10.0, 10.0, 10.0, 20.0, 20.0, 100.0};  // deg, deg, deg, mm, mm, mm
  double folded_mu_deg = 45.0;
  double folded_sigma_deg = 45.0;
};

// Pose-plausibility penalty on a candidate pelvis pose built from three parts:
//  - visibility: each femoral head projecting off-detector adds the squared
//    out-of-bounds pixel distance; the two heads multiply, so one visible
//    head zeroes the term;
//  - depth: head depth as a fraction d of source-to-detector distance costs
//    d^2 past the detector (d >= 1) and 100*(0.7-d)^2 too near the source
//    (d <= 0.7);
//  - orientation: projecting an obturator-foramen landmark above its
//    ipsilateral ASIS costs the squared row inversion (images are assumed
//    patient-up: smaller rows are superior).
// Total = 2*visibility + 2*depth + orientation; zero on plausible AP poses.
// Requires FH, ASIS, IOF landmarks bilaterally; throws otherwise.
double reg_de(const RigidPose& pose_p, const LandmarkMap3& lms3d,
              const ProjectionGeometry& g);

// Landmark reprojection prior: (1 / 2 sigma^2) * sum of squared distances
// between projected 3D landmarks and their detected 2D locations, measured in
// mm on the detector.  Sums over detections present in det2d only; throws if
// det2d is empty or no name matches.
double reg_reprojection(const RigidPose& pose_p, const LandmarkMap3& lms3d,
                        const LandmarkMap2& det2d, const ProjectionGeometry& g,
                        double sigma_l_mm);

// Gaussian prior on the Euler/translation decomposition of ref^-1 * pose:
// sum x_i^2 / (2 sigma_i^2) with rotations in degrees, translations in mm.
double reg_euler_prior(const RigidPose& pose, const RigidPose& ref, const Vec6& sigmas);

// Negative log density of a folded normal on the total rotation magnitude:
// -log[ phi((x-mu)/sigma) + phi((x+mu)/sigma) ], phi the standard normal pdf.
double reg_folded_normal_rot(double angle_deg, double mu_deg, double sigma_deg);

}  // namespace fregi
