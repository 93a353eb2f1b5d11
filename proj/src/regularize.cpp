#include "fregi/regularize.hpp"

#include <cmath>
#include <stdexcept>

namespace fregi {

namespace {

const Vec3& require_landmark(const LandmarkMap3& lms, const char* name) {
  auto it = lms.find(name);
  if (it == lms.end()) {
    throw std::invalid_argument(std::string("regularizer needs landmark ") + name);
  }
  return it->second;
}

// Squared pixel distance outside the detector, row and column independently.
double out_of_bounds_sq(const ProjectionGeometry& g, const ProjectedPoint& pp) {
  double r = 0.0, c = 0.0;
  if (pp.pixel.x() < 0.0) r = -pp.pixel.x();
  else if (pp.pixel.x() > g.rows - 1) r = pp.pixel.x() - (g.rows - 1);
  if (pp.pixel.y() < 0.0) c = -pp.pixel.y();
  else if (pp.pixel.y() > g.cols - 1) c = pp.pixel.y() - (g.cols - 1);
  return r * r + c * c;
}

double depth_penalty(double d) {
  if (d >= 1.0) return d * d;
  if (d <= 0.7) {
    const double e = 0.7 - d;
    return 100.0 * e * e;
  }
  return 0.0;
}

// Penalty when the inferior point q projects above the superior point p.
double row_inversion_penalty(const ProjectedPoint& p, const ProjectedPoint& q) {
  const double dr = q.pixel.x() - p.pixel.x();
  return dr < 0.0 ? dr * dr : 0.0;
}

}  // namespace

double reg_de(const RigidPose& pose_p, const LandmarkMap3& lms3d,
              const ProjectionGeometry& g) {
  const Vec3& fh_l = require_landmark(lms3d, "FH_l");
  const Vec3& fh_r = require_landmark(lms3d, "FH_r");
  const Vec3& asis_l = require_landmark(lms3d, "ASIS_l");
  const Vec3& asis_r = require_landmark(lms3d, "ASIS_r");
  const Vec3& iof_l = require_landmark(lms3d, "IOF_l");
  const Vec3& iof_r = require_landmark(lms3d, "IOF_r");

  const ProjectedPoint p_fh_l = project_point(g, pose_p, fh_l);
  const ProjectedPoint p_fh_r = project_point(g, pose_p, fh_r);
  const double vis = out_of_bounds_sq(g, p_fh_l) * out_of_bounds_sq(g, p_fh_r);
  const double depth = depth_penalty(p_fh_l.depth_ratio) + depth_penalty(p_fh_r.depth_ratio);
  const double up =
      row_inversion_penalty(project_point(g, pose_p, asis_l), project_point(g, pose_p, iof_l)) +
      row_inversion_penalty(project_point(g, pose_p, asis_r), project_point(g, pose_p, iof_r));
  return 2.0 * vis + 2.0 * depth + up;
}

double reg_reprojection(const RigidPose& pose_p, const LandmarkMap3& lms3d,
                        const LandmarkMap2& det2d, const ProjectionGeometry& g,
                        double sigma_l_mm) {
  if (sigma_l_mm <= 0.0) throw std::invalid_argument("reg_reprojection: sigma must be > 0");
  if (det2d.empty()) throw std::invalid_argument("reg_reprojection: no detections");
  double acc = 0.0;
  int used = 0;
  for (const auto& [name, det] : det2d) {
    if (!det.visible) continue;
    auto it = lms3d.find(name);
    if (it == lms3d.end()) continue;
    const ProjectedPoint pp = project_point(g, pose_p, it->second);
    const double dr = (pp.pixel.x() - det.pixel.x()) * g.pixel_spacing.x();
    const double dc = (pp.pixel.y() - det.pixel.y()) * g.pixel_spacing.y();
    acc += dr * dr + dc * dc;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("reg_reprojection: no usable detections");
  return acc / (2.0 * sigma_l_mm * sigma_l_mm);
}

double reg_euler_prior(const RigidPose& pose, const RigidPose& ref, const Vec6& sigmas) {
  for (int i = 0; i < 6; ++i) {
    if (sigmas[i] <= 0.0) throw std::invalid_argument("reg_euler_prior: sigmas must be > 0");
  }
  const EulerDecomposition d = euler_decompose(ref.inverse() * pose);
  const Vec6 x = d.stacked();
  double acc = 0.0;
  for (int i = 0; i < 6; ++i) acc += (x[i] * x[i]) / (2.0 * sigmas[i] * sigmas[i]);
  return acc;
}

double reg_folded_normal_rot(double angle_deg, double mu_deg, double sigma_deg) {
  if (sigma_deg <= 0.0) throw std::invalid_argument("reg_folded_normal_rot: sigma must be > 0");
  if (angle_deg < 0.0) throw std::invalid_argument("reg_folded_normal_rot: angle must be >= 0");
  auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * kPi); };
  const double a = (angle_deg - mu_deg) / sigma_deg;
  const double b = (angle_deg + mu_deg) / sigma_deg;
  return -std::log(phi(a) + phi(b));
}

}  // namespace fregi
