#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "fregi/eval.hpp"
#include "fregi/rng.hpp"
#include "fregi/similarity.hpp"

#include <cmath>

using namespace fregi;

namespace {

constexpr std::uint8_t kHemiL = 1, kHemiR = 2, kFemL = 3;

Image2D random_image(int rows, int cols, std::uint64_t seed) {
  Image2D img(rows, cols);
  RandomStream rs(seed);
  for (auto& p : img.pixels) p = float(rs.uniform(0.0, 1.0));
  return img;
}

}  // namespace

TEST_CASE("dice: hand-computed overlaps, vacuous classes, background handling") {
  LabelImage2D gt(4, 4, 0);
  LabelImage2D est(4, 4, 0);
  // Class 1: gt 4 pixels, est 3 pixels, 2 overlapping -> 2*2/(3+4) = 4/7.
  gt.at(0, 0) = gt.at(0, 1) = gt.at(0, 2) = gt.at(0, 3) = kHemiL;
  est.at(0, 0) = est.at(0, 1) = kHemiL;
  est.at(3, 3) = kHemiL;
  // Class 2: gt only -> 0.
  gt.at(1, 0) = kHemiR;
  // Class 3: perfect single-pixel match -> 1.
  gt.at(2, 2) = est.at(2, 2) = kFemL;

  const DiceResult d = dice_score(est, gt);
  CHECK(d.per_class[1] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(d.per_class[2] == 0.0);
  CHECK(d.per_class[3] == 1.0);
  for (int k : {4, 5, 6}) {
    CHECK(d.per_class[k] == 1.0);
    CHECK(d.vacuous[k]);
  }
  CHECK_FALSE(d.vacuous[1]);
  CHECK_FALSE(d.vacuous[2]);

  // Background: gt 10 pixels, est 12, overlap 9 -> 18/22.
  CHECK(d.per_class[0] == doctest::Approx(18.0 / 22.0).epsilon(1e-12));
  // Mean over classes 1..6 only.
  CHECK(d.mean == doctest::Approx((4.0 / 7.0 + 0.0 + 1.0 + 3.0) / 6.0).epsilon(1e-12));

  const DiceResult self = dice_score(gt, gt);
  CHECK(self.mean == 1.0);

  CHECK_THROWS_AS(dice_score(LabelImage2D(3, 4), gt), std::invalid_argument);
}

TEST_CASE("heatmap loss averages per-pair NCC and counts degenerate pairs") {
  std::vector<Heatmap> gt(3), est(3);
  for (int i = 0; i < 3; ++i) {
    gt[i].name = est[i].name = "L" + std::to_string(i);
    gt[i].values = random_image(12, 12, 100 + i);
  }
  est[0].values = gt[0].values;              // identical -> 1
  est[1].values = random_image(12, 12, 777);  // independent
  est[2].values = Image2D(12, 12);            // flat -> degenerate, 0

  int degen = -1;
  const double loss = heatmap_loss(est, gt, &degen);
  CHECK(degen == 1);
  const double expected =
      (ncc(est[0].values, gt[0].values) + ncc(est[1].values, gt[1].values) + 0.0) / 3.0;
  CHECK(loss == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(heatmap_loss({}, {}, nullptr), std::invalid_argument);
  est.pop_back();
  CHECK_THROWS_AS(heatmap_loss(est, gt, nullptr), std::invalid_argument);
}

TEST_CASE("combined loss is the negated sum of dice and rescaled NCC") {
  CHECK(combined_loss(1.0, 1.0) == -2.0);
  CHECK(combined_loss(0.0, -1.0) == 0.0);
  CHECK(combined_loss(0.5, 0.0) == -1.0);
  CHECK(combined_loss(0.25, 0.5) == doctest::Approx(-(0.25 + 0.75)).epsilon(1e-15));
}

TEST_CASE("landmark statistics: errors, misses, and ghosts") {
  AnnotationSet gt;
  gt.landmarks["A"] = Landmark2D{Vec2(10.0, 20.0), true};
  gt.landmarks["B"] = Landmark2D{Vec2(30.0, 40.0), true};
  gt.landmarks["C"] = Landmark2D{Vec2(50.0, 50.0), false};

  std::vector<Detection> det(3);
  det[0].name = "A";
  det[0].pixel = Vec2(13.0, 24.0);  // 3-4-5 triangle: 5 px
  det[0].detected = true;
  det[1].name = "B";
  det[1].detected = false;  // miss
  det[2].name = "C";
  det[2].pixel = Vec2(1.0, 1.0);
  det[2].detected = true;  // ghost

  const LandmarkStats s = landmark_stats(det, gt, Vec2(2.0, 0.5));
  CHECK(s.per_landmark.at("A").true_detection);
  CHECK(s.per_landmark.at("A").error_px == doctest::Approx(5.0).epsilon(1e-12));
  // mm residual: (3 * 2, 4 * 0.5) = (6, 2).
  CHECK(s.per_landmark.at("A").error_mm ==
        doctest::Approx(std::sqrt(40.0)).epsilon(1e-12));
  CHECK(s.per_landmark.at("B").false_negative);
  CHECK(s.per_landmark.at("C").false_positive);
  CHECK(s.mean_error_px == doctest::Approx(5.0));
  CHECK(s.fnr == doctest::Approx(0.5));  // 1 of 2 visible missed
  CHECK(s.fpr == doctest::Approx(1.0));  // 1 of 1 invisible detected

  std::vector<Detection> unknown(1);
  unknown[0].name = "nope";
  CHECK_THROWS_AS(landmark_stats(unknown, gt, Vec2(1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("pelvis pose error: rotations about the head midpoint, world axes") {
  RigidPose gt;
  gt.rotation = Eigen::AngleAxisd(0.7, Vec3(2, -1, 3).normalized()).toRotationMatrix();
  gt.translation = Vec3(40.0, -80.0, 700.0);
  const Vec3 center(36.0, -18.0, 2.0);

  // Error = 3 degrees about the world depth axis, centered at `center`:
  // reported as a pure per-axis z rotation with zero translation.
  {
    const double theta = deg2rad(3.0);
    const Vec3 axis_anat = gt.rotation.transpose() * Vec3(0, 0, 1);
    const Mat3 r = Eigen::AngleAxisd(theta, axis_anat).toRotationMatrix();
    RigidPose delta;
    delta.rotation = r;
    delta.translation = center - r * center;
    const PoseError e = pelvis_pose_error(gt * delta, gt, center);
    CHECK(e.rotation_deg == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(e.rotation_xyz_deg.x() == doctest::Approx(0.0).scale(1.0));
    CHECK(e.rotation_xyz_deg.y() == doctest::Approx(0.0).scale(1.0));
    CHECK(e.rotation_xyz_deg.z() == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(e.translation_mm == doctest::Approx(0.0).scale(1.0));
  }

  // Pure world-frame translation (5, -7, 12).
  {
    RigidPose delta;
    delta.translation = gt.rotation.transpose() * Vec3(5.0, -7.0, 12.0);
    const PoseError e = pelvis_pose_error(gt * delta, gt, center);
    CHECK(e.rotation_deg == doctest::Approx(0.0).scale(1.0));
    CHECK(e.translation_xyz_mm.x() == doctest::Approx(5.0).epsilon(1e-9));
    CHECK(e.translation_xyz_mm.y() == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(e.translation_xyz_mm.z() == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(e.translation_mm == doctest::Approx(std::sqrt(25.0 + 49.0 + 144.0)).epsilon(1e-9));
  }

  // Rotation about a non-center point leaks into the reported translation:
  // moving the pivot off the head midpoint by d adds (I - R) d.
  {
    const double theta = deg2rad(10.0);
    const Vec3 axis_anat = gt.rotation.transpose() * Vec3(1, 0, 0);
    const Mat3 r = Eigen::AngleAxisd(theta, axis_anat).toRotationMatrix();
    const Vec3 pivot = center + Vec3(0.0, 50.0, 0.0);
    RigidPose delta;
    delta.rotation = r;
    delta.translation = pivot - r * pivot;
    const PoseError e = pelvis_pose_error(gt * delta, gt, center);
    CHECK(e.rotation_deg == doctest::Approx(10.0).epsilon(1e-9));
    const Vec3 expect_t =
        gt.rotation * ((Mat3::Identity() - r) * (center - pivot));
    CHECK(e.translation_mm == doctest::Approx(expect_t.norm()).epsilon(1e-9));
  }

  // Identity estimate: zero everywhere.
  {
    const PoseError e = pelvis_pose_error(gt, gt, center);
    CHECK(e.rotation_deg == doctest::Approx(0.0).scale(1.0));
    CHECK(e.translation_mm == doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("femur pose error: anterior-pelvic-plane axes about the head") {
  const auto& scene = testfix::shared_scene();
  const AppFrame app = compute_app_frame(scene.all_landmarks());
  const Vec3 fh = scene.object("femur_l").landmarks3d.at("FH_l");

  const RigidPose gt_rel;  // femur rigid with pelvis

  // 15 degrees about the anterior-plane y axis (superior), centered at the
  // head: pure ry component, no translation.
  const double theta = deg2rad(15.0);
  const Vec3 axis = app.pose.rotation * Vec3(0, 1, 0);
  const Mat3 r = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
  RigidPose est_rel;
  est_rel.rotation = r;
  est_rel.translation = fh - r * fh;

  const PoseError e = femur_pose_error(est_rel, gt_rel, app, fh);
  CHECK(e.rotation_deg == doctest::Approx(15.0).epsilon(1e-9));
  CHECK(e.rotation_xyz_deg.x() == doctest::Approx(0.0).scale(1.0));
  CHECK(e.rotation_xyz_deg.y() == doctest::Approx(15.0).epsilon(1e-9));
  CHECK(e.rotation_xyz_deg.z() == doctest::Approx(0.0).scale(1.0));
  CHECK(e.translation_mm == doctest::Approx(0.0).scale(1.0));

  // Swapping est and gt keeps the magnitude.
  const PoseError back = femur_pose_error(gt_rel, est_rel, app, fh);
  CHECK(back.rotation_deg == doctest::Approx(15.0).epsilon(1e-9));
}
