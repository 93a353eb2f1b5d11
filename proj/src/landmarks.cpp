#include "fregi/landmarks.hpp"

#include "fregi/similarity.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace fregi {

Heatmap make_heatmap(const Landmark2D& lm, int rows, int cols, double sigma_px,
                     const std::string& name) {
  if (sigma_px <= 0.0) throw std::invalid_argument("make_heatmap: sigma must be > 0");
  if (rows < 1 || cols < 1) throw std::invalid_argument("make_heatmap: empty dims");
  Heatmap h;
  h.name = name;
  h.values = Image2D(rows, cols);
  if (!lm.visible) return h;
  const double norm = 1.0 / (2.0 * kPi * sigma_px * sigma_px);
  const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
  for (int r = 0; r < rows; ++r) {
    const double dr = r - lm.pixel.x();
    for (int c = 0; c < cols; ++c) {
      const double dc = c - lm.pixel.y();
      h.values.at(r, c) = float(norm * std::exp(-(dr * dr + dc * dc) * inv2s2));
    }
  }
  return h;
}

std::vector<Detection> extract_landmarks(const std::vector<Heatmap>& heatmaps,
                                         const LabelImage2D& lbl, int region,
                                         double threshold, double sigma_px) {
  if (region < 3 || region % 2 == 0) {
    throw std::invalid_argument("extract_landmarks: region must be odd and >= 3");
  }
  std::vector<Detection> out;
  out.reserve(heatmaps.size());
  const int half = region / 2;
  for (const auto& hm : heatmaps) {
    Detection det;
    det.name = hm.name;
    if (hm.values.rows != lbl.rows || hm.values.cols != lbl.cols) {
      throw std::invalid_argument("extract_landmarks: heatmap/label dims differ");
    }
    const auto owner = static_cast<std::uint8_t>(landmark_owner_class(hm.name));

    // Owner-class-masked argmax proposal.
    int best_r = -1, best_c = -1;
    float best_v = -1.0f;
    for (int r = 0; r < lbl.rows; ++r) {
      for (int c = 0; c < lbl.cols; ++c) {
        if (lbl.at(r, c) != owner) continue;
        const float v = hm.values.at(r, c);
        if (v > best_v) {
          best_v = v;
          best_r = r;
          best_c = c;
        }
      }
    }
    if (best_r < 0) {
      out.push_back(det);  // no candidate pixel carries the owning label
      continue;
    }

    // Border-truncated window around the proposal, template truncated the
    // same way so the comparison stays aligned.
    const int r0 = std::max(0, best_r - half);
    const int r1 = std::min(lbl.rows - 1, best_r + half);
    const int c0 = std::max(0, best_c - half);
    const int c1 = std::min(lbl.cols - 1, best_c + half);
    Image2D est(r1 - r0 + 1, c1 - c0 + 1);
    Image2D tmpl(r1 - r0 + 1, c1 - c0 + 1);
    const double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
    const double norm = 1.0 / (2.0 * kPi * sigma_px * sigma_px);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        est.at(r - r0, c - c0) = hm.values.at(r, c);
        const double dr = r - best_r;
        const double dc = c - best_c;
        tmpl.at(r - r0, c - c0) = float(norm * std::exp(-(dr * dr + dc * dc) * inv2s2));
      }
    }
    det.pixel = Vec2(double(best_r), double(best_c));
    det.template_ncc = ncc(est, tmpl);
    det.detected = det.template_ncc > threshold;
    out.push_back(det);
  }
  return out;
}

LandmarkMap2 detections_to_landmarks(const std::vector<Detection>& dets) {
  LandmarkMap2 out;
  for (const auto& d : dets) {
    Landmark2D lm;
    lm.pixel = d.pixel;
    lm.visible = d.detected;
    out[d.name] = lm;
  }
  return out;
}

RigidPose solve_pnp(const std::vector<PnpCorrespondence>& corr,
                    const ProjectionGeometry& g, const RigidPose& init) {
  if (corr.size() < 4) {
    throw std::invalid_argument("solve_pnp: need at least 4 correspondences");
  }
  g.validate();
  const int m = int(corr.size());

  auto residuals = [&](const RigidPose& pose) {
    VecX r(2 * m);
    for (int i = 0; i < m; ++i) {
      const ProjectedPoint pp = project_point(g, pose, corr[i].point3d);
      r[2 * i] = (pp.pixel.x() - corr[i].pixel.x()) * g.pixel_spacing.x();
      r[2 * i + 1] = (pp.pixel.y() - corr[i].pixel.y()) * g.pixel_spacing.y();
    }
    return r;
  };

  RigidPose pose = init;
  VecX r = residuals(pose);
  double err = r.squaredNorm();
  double damping = 1e-3;
  const double fd_step = 1e-5;

  for (int iter = 0; iter < 100; ++iter) {
    // Central-difference Jacobian over se(3) coordinates about the current pose.
    MatX jac(2 * m, 6);
    for (int j = 0; j < 6; ++j) {
      Vec6 dplus = Vec6::Zero(), dminus = Vec6::Zero();
      dplus[j] = fd_step;
      dminus[j] = -fd_step;
      const VecX rp = residuals(se3_exp(TangentVector6::from_stacked(dplus), pose));
      const VecX rm = residuals(se3_exp(TangentVector6::from_stacked(dminus), pose));
      jac.col(j) = (rp - rm) / (2.0 * fd_step);
    }
    const MatX jtj = jac.transpose() * jac;
    const VecX jtr = jac.transpose() * r;

    bool accepted = false;
    for (int tries = 0; tries < 12; ++tries) {
      MatX a = jtj;
      a.diagonal().array() += damping;
      const Vec6 delta = a.ldlt().solve(-jtr);
      const RigidPose cand = se3_exp(TangentVector6::from_stacked(delta), pose);
      const VecX rc = residuals(cand);
      const double ec = rc.squaredNorm();
      if (ec < err) {
        pose = cand;
        r = rc;
        err = ec;
        damping = std::max(damping * 0.5, 1e-12);
        accepted = true;
        if (delta.norm() < 1e-8) return pose;
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) break;  // damping exhausted; current pose is the best found
  }
  return pose;
}

const std::vector<std::string>& init_landmark_preference() {
  static const std::vector<std::string> order = {
      "FH_l",  "FH_r",  "IOF_l", "IOF_r", "IPS_l",  "IPS_r",  "MOF_l",
      "MOF_r", "SPS_l", "SPS_r", "GSN_l", "GSN_r",  "ASIS_l", "ASIS_r"};
  return order;
}

std::string select_init_landmark(const LandmarkMap2& det2d) {
  for (const auto& name : init_landmark_preference()) {
    auto it = det2d.find(name);
    if (it != det2d.end() && it->second.visible) return name;
  }
  throw std::invalid_argument("select_init_landmark: no usable landmark detection");
}

namespace {

Vec3 asis_sps_centroid(const LandmarkMap3& lms3d) {
  const char* names[4] = {"ASIS_l", "ASIS_r", "SPS_l", "SPS_r"};
  Vec3 c = Vec3::Zero();
  for (const char* n : names) {
    auto it = lms3d.find(n);
    if (it == lms3d.end()) {
      throw std::invalid_argument(std::string("init_ap_pose: missing landmark ") + n);
    }
    c += it->second;
  }
  return c / 4.0;
}

}  // namespace

RigidPose init_ap_pose(const LandmarkMap3& lms3d, const AppFrame& app,
                       const ProjectionGeometry& g, const Vec3& anchor3d,
                       const Vec2& anchor_px, double depth_ratio) {
  g.validate();
  if (depth_ratio <= 0.0 || depth_ratio >= 1.0) {
    throw std::invalid_argument("init_ap_pose: depth_ratio must be in (0, 1)");
  }
  // APP axes to world axes for a nominal AP view: patient left to +x (columns),
  // superior to -y (smaller rows), anterior to -z (toward the source).
  Mat3 axis_map;
  axis_map.col(0) = Vec3(1.0, 0.0, 0.0);
  axis_map.col(1) = Vec3(0.0, -1.0, 0.0);
  axis_map.col(2) = Vec3(0.0, 0.0, -1.0);
  const Mat3 rot = axis_map * app.pose.rotation.transpose();

  // Depth pins the centroid's world z; the anchor ray then fixes x and y.
  const Vec3 centroid = asis_sps_centroid(lms3d);
  const double z_centroid = depth_ratio * g.source_to_detector;
  const double z_anchor = (rot * anchor3d).z() + z_centroid - (rot * centroid).z();

  const Vec3 ray = g.pixel_to_world(anchor_px.x(), anchor_px.y());
  if (ray.z() <= 1e-9) throw std::invalid_argument("init_ap_pose: degenerate anchor ray");
  const Vec3 anchor_world = ray * (z_anchor / ray.z());

  RigidPose pose;
  pose.rotation = rot;
  pose.translation = anchor_world - rot * anchor3d;
  return pose;
}

RigidPose init_ap_centroid(const LandmarkMap3& lms3d, const AppFrame& app,
                           const ProjectionGeometry& g, double depth_ratio) {
  const Vec3 centroid = asis_sps_centroid(lms3d);
  const Vec2 center(0.5 * (g.rows - 1), 0.5 * (g.cols - 1));
  return init_ap_pose(lms3d, app, g, centroid, center, depth_ratio);
}

RigidPose init_ap_single_landmark(const LandmarkMap3& lms3d, const LandmarkMap2& det2d,
                                  const AppFrame& app, const ProjectionGeometry& g,
                                  double depth_ratio) {
  const std::string name = select_init_landmark(det2d);
  auto it3 = lms3d.find(name);
  if (it3 == lms3d.end()) {
    throw std::invalid_argument("init_ap_single_landmark: detection " + name +
                                " has no 3D landmark");
  }
  return init_ap_pose(lms3d, app, g, it3->second, det2d.at(name).pixel, depth_ratio);
}

}  // namespace fregi
