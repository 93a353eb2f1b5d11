#pragma once

#include "fregi/types.hpp"

#include <map>
#include <string>

namespace fregi {

// Rigid transform: p_out = rotation * p_in + translation.
//
// World frame convention used throughout the project: the X-ray source sits at
// the origin and the principal axis points along +z toward the detector plane
// at z = source_to_detector.  Detector rows increase with +y, columns with +x.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 operator()(const Vec3& p) const { return rotation * p + translation; }

  RigidPose inverse() const;
  Mat4 matrix() const;

  static RigidPose identity() { return {}; }
  static RigidPose from_matrix(const Mat4& m);

  // R orthonormal and det(R)=1, both within tol.
  bool is_valid(double tol = 1e-9) const;
};

RigidPose operator*(const RigidPose& a, const RigidPose& b);

// se(3) coordinates: axis-angle rotation (radians) and translation (mm).
struct TangentVector6 {
  Vec3 rot = Vec3::Zero();
  Vec3 trans = Vec3::Zero();

  Vec6 stacked() const;
  static TangentVector6 from_stacked(const Vec6& v);
};

// Pinhole C-arm model.  Units: mm and pixels; principal point and pixel
// spacing indexed (row, col).
struct ProjectionGeometry {
  double source_to_detector = 1020.0;
  Vec2 pixel_spacing{1.0, 1.0};  // (row, col) mm
  int rows = 0;
  int cols = 0;
  Vec2 principal_point{0.0, 0.0};  // (row, col) px

  void validate() const;  // throws std::invalid_argument on bad fields

  // Geometry for an image downsampled by an integer factor along each dim.
  ProjectionGeometry downsampled(int factor) const;

  // World position (mm) of a detector pixel center.
  Vec3 pixel_to_world(double row, double col) const;

  std::string to_json() const;
  static ProjectionGeometry from_json(const std::string& text);
};

struct ProjectedPoint {
  Vec2 pixel;         // (row, col)
  double depth_ratio; // 0 at source, 1 at detector plane
  bool clamped;       // true when the point was at/behind the source
};

// Anterior pelvic plane frame: pose maps APP coordinates to volume (anatomy)
// coordinates.  Axes: x from R to L ASIS, y superior (away from the pubis
// symphysis), z = x cross y (anterior).
struct AppFrame {
  RigidPose pose;
};

Mat3 skew(const Vec3& v);

Mat3 so3_exp_matrix(const Vec3& w);
Vec3 so3_log_matrix(const Mat3& r);

// ref * exp(v).  Closed-form Rodrigues rotation and V-matrix translation;
// small-angle branch below 1e-8.
RigidPose se3_exp(const TangentVector6& v, const RigidPose& ref);
// Inverse of se3_exp; throws std::domain_error when the relative rotation
// angle is within 1e-6 of pi.
TangentVector6 se3_log(const RigidPose& p, const RigidPose& ref);

Mat3 so3_exp(const Vec3& v, const Mat3& ref);
Vec3 so3_log(const Mat3& r, const Mat3& ref);

// Pinhole projection of a world-frame point already posed by world_from_obj.
ProjectedPoint project_point(const ProjectionGeometry& g,
                             const RigidPose& world_from_obj,
                             const Vec3& p_obj);

using LandmarkMap3 = std::map<std::string, Vec3>;

// Builds the APP frame from ASIS_l/ASIS_r/SPS_l/SPS_r entries.
// Throws std::invalid_argument when landmarks are missing or degenerate.
AppFrame compute_app_frame(const LandmarkMap3& lms);

// Extrinsic XYZ decomposition: rotation = Rz(rz)*Ry(ry)*Rx(rx).
// Angles in degrees, translations in mm.  Gimbal lock (|ry| = 90 deg)
// resolved with rz = 0.
struct EulerDecomposition {
  double rx_deg, ry_deg, rz_deg;
  double tx_mm, ty_mm, tz_mm;

  Vec6 stacked() const;
};

EulerDecomposition euler_decompose(const RigidPose& p);
RigidPose euler_recompose(const EulerDecomposition& e);

std::string pose_to_json(const RigidPose& p);
RigidPose pose_from_json(const std::string& text);

}  // namespace fregi
