#include "fregi/geometry.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace fregi {

using nlohmann::json;

RigidPose RigidPose::inverse() const
{
  RigidPose out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

Mat4 RigidPose::matrix() const
{
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigidPose RigidPose::from_matrix(const Mat4& m)
{
  RigidPose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

bool RigidPose::is_valid(double tol) const
{
  const Mat3 rtr = rotation * rotation.transpose();
  return (rtr - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidPose operator*(const RigidPose& a, const RigidPose& b)
{
  RigidPose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Vec6 TangentVector6::stacked() const
{
  Vec6 v;
  v << rot, trans;
  return v;
}

TangentVector6 TangentVector6::from_stacked(const Vec6& v)
{
  TangentVector6 t;
  t.rot = v.head<3>();
  t.trans = v.tail<3>();
  return t;
}

void ProjectionGeometry::validate() const
{
  if (source_to_detector <= 0.0 || pixel_spacing.minCoeff() <= 0.0 ||
      rows <= 0 || cols <= 0) {
    throw std::invalid_argument("projection geometry fields must be strictly positive");
  }
  if (principal_point[0] < 0.0 || principal_point[0] > rows - 1 ||
      principal_point[1] < 0.0 || principal_point[1] > cols - 1) {
    throw std::invalid_argument("principal point outside detector bounds");
  }
}

ProjectionGeometry ProjectionGeometry::downsampled(int factor) const
{
  if (factor < 1) {
    throw std::invalid_argument("downsample factor must be >= 1");
  }
  if (factor == 1) {
    return *this;
  }
  ProjectionGeometry g = *this;
  g.rows = (rows + factor - 1) / factor;
  g.cols = (cols + factor - 1) / factor;
  g.pixel_spacing = pixel_spacing * static_cast<double>(factor);
  // Coarse pixel (0,0) center sits at the mean of the fine pixels it covers.
  const double f = factor;
  g.principal_point[0] = (principal_point[0] - 0.5 * (f - 1.0)) / f;
  g.principal_point[1] = (principal_point[1] - 0.5 * (f - 1.0)) / f;
  return g;
}

Vec3 ProjectionGeometry::pixel_to_world(double row, double col) const
{
  return {(col - principal_point[1]) * pixel_spacing[1],
          (row - principal_point[0]) * pixel_spacing[0],
          source_to_detector};
}

std::string ProjectionGeometry::to_json() const
{
  json j;
  j["src_to_det_mm"] = source_to_detector;
  j["pixel_spacing_mm"] = {pixel_spacing[0], pixel_spacing[1]};
  j["rows"] = rows;
  j["cols"] = cols;
  j["principal_point_px"] = {principal_point[0], principal_point[1]};
  return j.dump(2);
}

ProjectionGeometry ProjectionGeometry::from_json(const std::string& text)
{
  const json j = json::parse(text);
  ProjectionGeometry g;
  g.source_to_detector = j.at("src_to_det_mm").get<double>();
  g.pixel_spacing[0] = j.at("pixel_spacing_mm").at(0).get<double>();
  g.pixel_spacing[1] = j.at("pixel_spacing_mm").at(1).get<double>();
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  g.principal_point[0] = j.at("principal_point_px").at(0).get<double>();
  g.principal_point[1] = j.at("principal_point_px").at(1).get<double>();
  g.validate();
  return g;
}

Mat3 skew(const Vec3& v)
{
  Mat3 m;
  m <<    0, -v[2],  v[1],
       v[2],     0, -v[0],
      -v[1],  v[0],     0;
  return m;
}

Mat3 so3_exp_matrix(const Vec3& w)
{
  const double theta = w.norm();
  const Mat3 k = skew(w);
  if (theta < 1e-8) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double s = std::sin(theta) / theta;
  const double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + s * k + c * k * k;
}

Vec3 so3_log_matrix(const Mat3& r)
{
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);

  Vec3 axis_unnorm(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));

  if (theta < 1e-8) {
    return 0.5 * axis_unnorm;
  }
  if (theta > kPi - 1e-6) {
    throw std::domain_error("so3_log: rotation angle at pi is degenerate");
  }
  return (theta / (2.0 * std::sin(theta))) * axis_unnorm;
}

namespace {

// V matrix of the SE(3) exponential: t = V * u.
Mat3 se3_v_matrix(const Vec3& w)
{
  const double theta = w.norm();
  const Mat3 k = skew(w);
  if (theta < 1e-8) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  const double a = (1.0 - std::cos(theta)) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 se3_v_inverse(const Vec3& w)
{
  const double theta = w.norm();
  const Mat3 k = skew(w);
  if (theta < 1e-8) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double cot_term = 1.0 / (theta * theta) -
                          (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Mat3::Identity() - 0.5 * k + cot_term * k * k;
}

}  // namespace

RigidPose se3_exp(const TangentVector6& v, const RigidPose& ref)
{
  RigidPose delta;
  delta.rotation = so3_exp_matrix(v.rot);
  delta.translation = se3_v_matrix(v.rot) * v.trans;
  return ref * delta;
}

TangentVector6 se3_log(const RigidPose& p, const RigidPose& ref)
{
  const RigidPose rel = ref.inverse() * p;
  TangentVector6 v;
  v.rot = so3_log_matrix(rel.rotation);
  v.trans = se3_v_inverse(v.rot) * rel.translation;
  return v;
}

Mat3 so3_exp(const Vec3& v, const Mat3& ref)
{
  return ref * so3_exp_matrix(v);
}

Vec3 so3_log(const Mat3& r, const Mat3& ref)
{
  return so3_log_matrix(ref.transpose() * r);
}

ProjectedPoint project_point(const ProjectionGeometry& g,
                             const RigidPose& world_from_obj,
                             const Vec3& p_obj)
{
  const Vec3 w = world_from_obj(p_obj);

  ProjectedPoint out;
  out.depth_ratio = w[2] / g.source_to_detector;
  out.clamped = w[2] < 1e-9;

  const double z = out.clamped ? ((w[2] < 0.0) ? std::min(w[2], -1e-9) : 1e-9)
                               : w[2];
  const double scale = g.source_to_detector / z;
  out.pixel[0] = g.principal_point[0] + (w[1] * scale) / g.pixel_spacing[0];
  out.pixel[1] = g.principal_point[1] + (w[0] * scale) / g.pixel_spacing[1];
  return out;
}

AppFrame compute_app_frame(const LandmarkMap3& lms)
{
  const auto get = [&lms](const char* name) -> const Vec3& {
    const auto it = lms.find(name);
    if (it == lms.end()) {
      throw std::invalid_argument(std::string("compute_app_frame: missing landmark ") + name);
    }
    return it->second;
  };

  const Vec3& asis_l = get("ASIS_l");
  const Vec3& asis_r = get("ASIS_r");
  const Vec3 sps_mid = 0.5 * (get("SPS_l") + get("SPS_r"));

  const Vec3 origin = 0.5 * (asis_l + asis_r);

  Vec3 x = asis_l - asis_r;
  const double x_norm = x.norm();
  if (x_norm < 1e-9) {
    throw std::invalid_argument("compute_app_frame: ASIS landmarks coincide");
  }
  x /= x_norm;

  // y points superior: away from the symphysis midpoint, orthogonal to x.
  Vec3 y = origin - sps_mid;
  y -= y.dot(x) * x;
  const double y_norm = y.norm();
  if (y_norm < 1e-9) {
    throw std::invalid_argument("compute_app_frame: degenerate (collinear) landmarks");
  }
  y /= y_norm;

  const Vec3 z = x.cross(y);

  AppFrame app;
  app.pose.rotation.col(0) = x;
  app.pose.rotation.col(1) = y;
  app.pose.rotation.col(2) = z;
  app.pose.translation = origin;
  return app;
}

Vec6 EulerDecomposition::stacked() const
{
  Vec6 v;
  v << rx_deg, ry_deg, rz_deg, tx_mm, ty_mm, tz_mm;
  return v;
}

EulerDecomposition euler_decompose(const RigidPose& p)
{
  const Mat3& r = p.rotation;
  EulerDecomposition e{};

  const double sy = -r(2, 0);
  double rx, ry, rz;
  if (std::abs(sy) >= 1.0 - 1e-12) {
    // gimbal lock: rz fixed to 0
    ry = (sy > 0.0) ? kPi / 2.0 : -kPi / 2.0;
    rz = 0.0;
    rx = std::atan2(-r(1, 2), r(1, 1));
  } else {
    ry = std::asin(sy);
    rx = std::atan2(r(2, 1), r(2, 2));
    rz = std::atan2(r(1, 0), r(0, 0));
  }

  e.rx_deg = rad2deg(rx);
  e.ry_deg = rad2deg(ry);
  e.rz_deg = rad2deg(rz);
  e.tx_mm = p.translation[0];
  e.ty_mm = p.translation[1];
  e.tz_mm = p.translation[2];
  return e;
}

RigidPose euler_recompose(const EulerDecomposition& e)
{
  const auto rot_axis = [](int axis, double deg) {
    Vec3 w = Vec3::Zero();
    w[axis] = deg2rad(deg);
    return so3_exp_matrix(w);
  };
  RigidPose p;
  p.rotation = rot_axis(2, e.rz_deg) * rot_axis(1, e.ry_deg) * rot_axis(0, e.rx_deg);
  p.translation = Vec3(e.tx_mm, e.ty_mm, e.tz_mm);
  return p;
}

std::string pose_to_json(const RigidPose& p)
{
  const Mat4 m = p.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(row);
  }
  return rows.dump(2);
}

RigidPose pose_from_json(const std::string& text)
{
  const json j = json::parse(text);
  if (!j.is_array() || j.size() != 4) {
    throw std::invalid_argument("pose JSON must be a 4x4 row-major array");
  }
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = j.at(r).at(c).get<double>();
    }
  }
  return RigidPose::from_matrix(m);
}

AnatomyClass landmark_owner_class(const std::string& name)
{
  const bool left = name.size() >= 2 && name.compare(name.size() - 2, 2, "_l") == 0;
  if (name.rfind("FH_", 0) == 0) {
    return left ? AnatomyClass::femur_l : AnatomyClass::femur_r;
  }
  return left ? AnatomyClass::hemipelvis_l : AnatomyClass::hemipelvis_r;
}

}  // namespace fregi
