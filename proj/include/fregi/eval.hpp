#pragma once

#include "fregi/annotate.hpp"
#include "fregi/geometry.hpp"
#include "fregi/landmarks.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace fregi {

struct DiceResult {
  // Index by class code; background (0) is reported but excluded from mean.
  std::array<double, kNumClasses> per_class{};
  std::array<bool, kNumClasses> vacuous{};  // both masks empty -> score 1, flagged
  double mean = 0.0;                         // over non-background classes
};

// Per-class dice 2|A∩B| / (|A| + |B|) on hard masks; a class empty in both
// inputs scores 1 and is flagged vacuous.
DiceResult dice_score(const LabelImage2D& est, const LabelImage2D& gt);

// Mean whole-image NCC across corresponding heatmaps; degenerate pairs
// contribute 0 (flag count returned through *degenerate_count if non-null).
double heatmap_loss(const std::vector<Heatmap>& est, const std::vector<Heatmap>& gt,
                    int* degenerate_count = nullptr);

// -[dice + (heatmap_ncc + 1) / 2]; always in [-2, 0], lower is better.
double combined_loss(double dice_mean, double heatmap_ncc);

struct LandmarkStats {
  struct PerLandmark {
    double error_px = 0.0;
    double error_mm = 0.0;
    bool true_detection = false;
    bool false_negative = false;  // visible in gt, not detected
    bool false_positive = false;  // detected, invisible in gt
  };
  std::map<std::string, PerLandmark> per_landmark;
  double mean_error_px = 0.0;  // over true detections
  double mean_error_mm = 0.0;
  double fnr = 0.0;  // false negatives / gt-visible
  double fpr = 0.0;  // false positives / gt-invisible
};

LandmarkStats landmark_stats(const std::vector<Detection>& det, const AnnotationSet& gt,
                             const Vec2& pixel_spacing_mm);

struct PoseError {
  double rotation_deg = 0.0;     // axis-angle magnitude
  Vec3 rotation_xyz_deg{0.0, 0.0, 0.0};   // |per-axis| decomposition
  double translation_mm = 0.0;
  Vec3 translation_xyz_mm{0.0, 0.0, 0.0};  // |per-axis|
};

// Pelvis pose error: relative pose gt^-1 * est with the rotation center moved
// to fh_mid (anatomy mm).  Per-axis components are expressed in the projective
// frame (x columns, y rows, z depth).
PoseError pelvis_pose_error(const RigidPose& est, const RigidPose& gt, const Vec3& fh_mid);

// Femur pose error on femur-relative-to-pelvis poses, expressed in APP axes
// with the rotation center at the ipsilateral femoral head.
PoseError femur_pose_error(const RigidPose& est_rel, const RigidPose& gt_rel,
                           const AppFrame& app, const Vec3& fh);

}  // namespace fregi
