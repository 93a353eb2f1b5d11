#include "fregi/eval.hpp"

#include "fregi/similarity.hpp"

#include <cmath>
#include <stdexcept>

namespace fregi {

DiceResult dice_score(const LabelImage2D& est, const LabelImage2D& gt) {
  if (est.rows != gt.rows || est.cols != gt.cols) {
    throw std::invalid_argument("dice_score: label dims differ");
  }
  std::array<double, kNumClasses> inter{}, est_n{}, gt_n{};
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::uint8_t e = est.labels[i];
    const std::uint8_t g = gt.labels[i];
    if (e < kNumClasses) est_n[e] += 1.0;
    if (g < kNumClasses) gt_n[g] += 1.0;
    if (e == g && e < kNumClasses) inter[e] += 1.0;
  }
  DiceResult out;
  double acc = 0.0;
  for (int k = 0; k < kNumClasses; ++k) {
    const double denom = est_n[k] + gt_n[k];
    if (denom == 0.0) {
      out.per_class[k] = 1.0;
      out.vacuous[k] = true;
    } else {
      out.per_class[k] = 2.0 * inter[k] / denom;
    }
    if (k > 0) acc += out.per_class[k];
  }
  out.mean = acc / (kNumClasses - 1);
  return out;
}

double heatmap_loss(const std::vector<Heatmap>& est, const std::vector<Heatmap>& gt,
                    int* degenerate_count) {
  if (est.size() != gt.size() || est.empty()) {
    throw std::invalid_argument("heatmap_loss: mismatched or empty heatmap lists");
  }
  if (degenerate_count) *degenerate_count = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    bool degenerate = false;
    acc += ncc(est[i].values, gt[i].values, &degenerate);
    if (degenerate && degenerate_count) ++(*degenerate_count);
  }
  return acc / double(est.size());
}

double combined_loss(double dice_mean, double heatmap_ncc) {
  return -(dice_mean + 0.5 * (heatmap_ncc + 1.0));
}

LandmarkStats landmark_stats(const std::vector<Detection>& det, const AnnotationSet& gt,
                             const Vec2& pixel_spacing_mm) {
  LandmarkStats out;
  int visible = 0, invisible = 0, fn = 0, fp = 0, hits = 0;
  double px_acc = 0.0, mm_acc = 0.0;
  for (const auto& d : det) {
    auto it = gt.landmarks.find(d.name);
    if (it == gt.landmarks.end()) {
      throw std::invalid_argument("landmark_stats: no ground truth for " + d.name);
    }
    LandmarkStats::PerLandmark pl;
    const bool gt_visible = it->second.visible;
    gt_visible ? ++visible : ++invisible;
    if (d.detected && gt_visible) {
      const double dr = d.pixel.x() - it->second.pixel.x();
      const double dc = d.pixel.y() - it->second.pixel.y();
      pl.true_detection = true;
      pl.error_px = std::sqrt(dr * dr + dc * dc);
      const double dr_mm = dr * pixel_spacing_mm.x();
      const double dc_mm = dc * pixel_spacing_mm.y();
      pl.error_mm = std::sqrt(dr_mm * dr_mm + dc_mm * dc_mm);
      px_acc += pl.error_px;
      mm_acc += pl.error_mm;
      ++hits;
    } else if (!d.detected && gt_visible) {
      pl.false_negative = true;
      ++fn;
    } else if (d.detected && !gt_visible) {
      pl.false_positive = true;
      ++fp;
    }
    out.per_landmark[d.name] = pl;
  }
  out.mean_error_px = hits > 0 ? px_acc / hits : 0.0;
  out.mean_error_mm = hits > 0 ? mm_acc / hits : 0.0;
  out.fnr = visible > 0 ? double(fn) / visible : 0.0;
  out.fpr = invisible > 0 ? double(fp) / invisible : 0.0;
  return out;
}

namespace {

// Shared error decomposition: relative pose delta = gt^-1 * est acting in
// anatomy coordinates, rotation re-centered at center, components expressed in
// the axes given by frame (columns = frame axes in anatomy coordinates).
PoseError decompose_error(const RigidPose& est, const RigidPose& gt, const Vec3& center,
                          const Mat3& frame) {
  const RigidPose delta = gt.inverse() * est;
  PoseError out;

  const Mat3 rot_in_frame = frame.transpose() * delta.rotation * frame;
  const Vec3 axis_angle = so3_log_matrix(rot_in_frame);
  out.rotation_deg = rad2deg(axis_angle.norm());
  const EulerDecomposition dec = euler_decompose(RigidPose{rot_in_frame, Vec3::Zero()});
  out.rotation_xyz_deg =
      Vec3(std::abs(dec.rx_deg), std::abs(dec.ry_deg), std::abs(dec.rz_deg));

  const Vec3 t = frame.transpose() * (delta(center) - center);
  out.translation_mm = t.norm();
  out.translation_xyz_mm = t.cwiseAbs();
  return out;
}

}  // namespace

PoseError pelvis_pose_error(const RigidPose& est, const RigidPose& gt, const Vec3& fh_mid) {
  // Projective-frame axes pulled back into anatomy coordinates through the
  // ground-truth pose: world axis k is column k of gt.rotation^T.
  return decompose_error(est, gt, fh_mid, gt.rotation.transpose());
}

PoseError femur_pose_error(const RigidPose& est_rel, const RigidPose& gt_rel,
                           const AppFrame& app, const Vec3& fh) {
  return decompose_error(est_rel, gt_rel, fh, app.pose.rotation);
}

}  // namespace fregi
