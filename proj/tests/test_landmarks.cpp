#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "fregi/annotate.hpp"
#include "fregi/landmarks.hpp"
#include "fregi/rng.hpp"

#include <cmath>

using namespace fregi;

TEST_CASE("heatmaps integrate to one and peak at the landmark") {
  Landmark2D lm;
  lm.pixel = Vec2(30.3, 24.8);
  lm.visible = true;
  const Heatmap h = make_heatmap(lm, 64, 64, 2.5, "FH_l");
  CHECK(h.name == "FH_l");

  double sum = 0.0;
  float peak = -1.0f;
  int pr = -1, pc = -1;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      sum += h.values.at(r, c);
      if (h.values.at(r, c) > peak) {
        peak = h.values.at(r, c);
        pr = r;
        pc = c;
      }
    }
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pr == 30);  // nearest pixel to the subpixel center
  CHECK(pc == 25);

  // Integer-centered landmark: closed-form peak value and radial symmetry.
  Landmark2D li;
  li.pixel = Vec2(40.0, 20.0);
  li.visible = true;
  const double sigma = 2.0;
  const Heatmap hi = make_heatmap(li, 64, 64, sigma);
  CHECK(hi.values.at(40, 20) ==
        doctest::Approx(1.0 / (2.0 * kPi * sigma * sigma)).epsilon(1e-6));
  CHECK(hi.values.at(43, 20) == hi.values.at(37, 20));
  CHECK(hi.values.at(40, 25) == hi.values.at(40, 15));
  CHECK(hi.values.at(42, 22) ==
        doctest::Approx(hi.values.at(38, 18)).epsilon(1e-7));

  Landmark2D hidden;
  hidden.visible = false;
  const Heatmap hz = make_heatmap(hidden, 16, 16);
  for (float v : hz.values.pixels) CHECK(v == 0.0f);

  CHECK_THROWS_AS(make_heatmap(lm, 64, 64, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_heatmap(lm, 0, 64), std::invalid_argument);
}

TEST_CASE("extraction recovers snapped peaks gated by the owning class") {
  // Ground truth at a subpixel position; the label image marks the owning
  // class in a block around it.
  Landmark2D lm;
  lm.pixel = Vec2(20.0, 33.0);
  lm.visible = true;
  const Heatmap h = make_heatmap(lm, 48, 48, 2.5, "IOF_l");

  LabelImage2D lbl(48, 48, 0);
  for (int r = 12; r < 30; ++r)
    for (int c = 25; c < 42; ++c)
      lbl.at(r, c) = std::uint8_t(AnatomyClass::hemipelvis_l);

  const auto dets = extract_landmarks({h}, lbl);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].name == "IOF_l");
  CHECK(dets[0].detected);
  CHECK(dets[0].template_ncc > 0.99);
  CHECK(dets[0].pixel.x() == 20.0);
  CHECK(dets[0].pixel.y() == 33.0);

  // Same heatmap, but the true peak region carries the wrong class: the
  // proposal moves to the best in-class pixel and the template match fails.
  LabelImage2D wrong(48, 48, 0);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      wrong.at(r, c) = std::uint8_t(AnatomyClass::hemipelvis_l);
  const auto far = extract_landmarks({h}, wrong);
  REQUIRE(far.size() == 1);
  CHECK(far[0].pixel.x() == 5.0);  // in-class argmax nearest the peak
  CHECK(far[0].pixel.y() == 5.0);
  CHECK_FALSE(far[0].detected);

  // No pixel of the owning class at all.
  LabelImage2D empty(48, 48, 0);
  const auto none = extract_landmarks({h}, empty);
  REQUIRE(none.size() == 1);
  CHECK_FALSE(none[0].detected);

  // Invisible landmark: zero heatmap is degenerate under NCC, never detected.
  Landmark2D hidden;
  hidden.visible = false;
  const Heatmap hz = make_heatmap(hidden, 48, 48, 2.5, "IOF_l");
  const auto ghost = extract_landmarks({hz}, lbl);
  REQUIRE(ghost.size() == 1);
  CHECK_FALSE(ghost[0].detected);
  CHECK(ghost[0].template_ncc == 0.0);

  CHECK_THROWS_AS(extract_landmarks({h}, lbl, 24), std::invalid_argument);
  CHECK_THROWS_AS(extract_landmarks({h}, lbl, 1), std::invalid_argument);
  CHECK_THROWS_AS(extract_landmarks({h}, LabelImage2D(10, 10)), std::invalid_argument);
}

TEST_CASE("phantom roundtrip: every visible landmark re-detected exactly") {
  const auto& scene = testfix::shared_scene();
  const ProjectionGeometry g = testfix::small_geometry();
  const MultiBodyPose pose = testfix::ap_pose(scene, g);

  // Annotation heatmaps place their mean on the nearest raster pixel; a
  // subpixel mean would cap the template match near 0.98 and tie the argmax
  // whenever a projection lands exactly between two pixels (which the
  // symmetric anterior-plane landmarks do at this pose).
  const AnnotationSet ann = generate_annotations(scene, g, pose);
  int visible = 0;
  for (const auto& [name, lm] : ann.landmarks) visible += lm.visible;
  REQUIRE(visible == 14);

  const auto dets = extract_landmarks(ann.heatmaps, ann.labels);
  REQUIRE(dets.size() == ann.heatmaps.size());
  for (const auto& d : dets) {
    CHECK(d.detected);
    CHECK(d.template_ncc > 0.99);
    const Vec2 truth = ann.landmarks.at(d.name).pixel;
    CHECK(d.pixel.x() == std::round(truth.x()));
    CHECK(d.pixel.y() == std::round(truth.y()));
  }

  const LandmarkMap2 back = detections_to_landmarks(dets);
  CHECK(back.size() == dets.size());
  for (const auto& d : dets) {
    CHECK(back.at(d.name).visible == d.detected);
    CHECK((back.at(d.name).pixel - d.pixel).norm() == 0.0);
  }
}

TEST_CASE("pose from correspondences: 50 random poses recovered") {
  const auto& scene = testfix::shared_scene();
  const ProjectionGeometry g = testfix::small_geometry();
  const RigidPose nominal = testfix::ap_pose(scene, g).pelvis;
  const LandmarkMap3 lms = scene.all_landmarks();

  RandomStream rs(515);
  int ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    TangentVector6 d;
    for (int i = 0; i < 3; ++i) d.rot[i] = deg2rad(rs.uniform(-10.0, 10.0));
    for (int i = 0; i < 3; ++i) d.trans[i] = rs.uniform(-20.0, 20.0);
    const RigidPose truth = se3_exp(d, nominal);

    std::vector<PnpCorrespondence> corr;
    for (const auto& [name, p3] : lms) {
      const ProjectedPoint pp = project_point(g, truth, p3);
      if (pp.clamped) continue;
      corr.push_back({p3, pp.pixel});
    }
    REQUIRE(corr.size() >= 4);

    const RigidPose est = solve_pnp(corr, g, nominal);
    const double rot_err_deg =
        rad2deg(so3_log_matrix(est.rotation.transpose() * truth.rotation).norm());
    const double trans_err_mm = (est.translation - truth.translation).norm();
    if (rot_err_deg < 0.1 && trans_err_mm < 0.5) ++ok;
  }
  CHECK(ok == 50);

  CHECK_THROWS_AS(solve_pnp({{Vec3::Zero(), Vec2(0, 0)}}, g, nominal),
                  std::invalid_argument);
}

TEST_CASE("initialization landmark preference and selection") {
  const auto& order = init_landmark_preference();
  REQUIRE(order.size() == 14);
  CHECK(order[0] == "FH_l");
  CHECK(order[1] == "FH_r");
  CHECK(order[2] == "IOF_l");
  CHECK(order.back() == "ASIS_r");

  LandmarkMap2 det;
  det["ASIS_l"] = Landmark2D{Vec2(3, 3), true};
  det["FH_l"] = Landmark2D{Vec2(10, 10), false};  // present but not detected
  det["MOF_r"] = Landmark2D{Vec2(20, 20), true};
  CHECK(select_init_landmark(det) == "MOF_r");

  det["IOF_r"] = Landmark2D{Vec2(9, 9), true};
  CHECK(select_init_landmark(det) == "IOF_r");

  LandmarkMap2 nothing;
  nothing["FH_l"] = Landmark2D{Vec2(1, 1), false};
  CHECK_THROWS_AS(select_init_landmark(nothing), std::invalid_argument);
}

TEST_CASE("AP initialization pins orientation, depth, and the anchor ray") {
  const auto& scene = testfix::shared_scene();
  const ProjectionGeometry g = testfix::small_geometry();
  const LandmarkMap3 lms = scene.all_landmarks();
  const AppFrame app = compute_app_frame(lms);

  const double depth = 0.75;
  const RigidPose pose = init_ap_centroid(lms, app, g, depth);

  // Orientation: anterior-pelvic-plane axes land on the detector axes
  // (patient left to +columns, superior to smaller rows, anterior toward
  // the source).
  const Mat3 m = pose.rotation * app.pose.rotation;
  Mat3 expect;
  expect.col(0) = Vec3(1, 0, 0);
  expect.col(1) = Vec3(0, -1, 0);
  expect.col(2) = Vec3(0, 0, -1);
  CHECK((m - expect).norm() < 1e-12);

  // The ASIS/SPS centroid sits at the requested depth and the image center.
  const Vec3 centroid = 0.25 * (lms.at("ASIS_l") + lms.at("ASIS_r") +
                                lms.at("SPS_l") + lms.at("SPS_r"));
  const Vec3 cw = pose(centroid);
  CHECK(cw.z() == doctest::Approx(depth * g.source_to_detector).epsilon(1e-12));
  const ProjectedPoint cpp = project_point(g, pose, centroid);
  CHECK(cpp.pixel.x() == doctest::Approx(31.5).epsilon(1e-9));
  CHECK(cpp.pixel.y() == doctest::Approx(31.5).epsilon(1e-9));

  // Anchored variant: the chosen landmark projects exactly to its detection.
  LandmarkMap2 det;
  det["FH_l"] = Landmark2D{Vec2(40.0, 22.0), true};
  det["ASIS_r"] = Landmark2D{Vec2(5.0, 5.0), true};
  const RigidPose anchored = init_ap_single_landmark(lms, det, app, g, depth);
  const ProjectedPoint fh = project_point(g, anchored, lms.at("FH_l"));
  CHECK(fh.pixel.x() == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(fh.pixel.y() == doctest::Approx(22.0).epsilon(1e-9));
  // Depth is still pinned by the centroid, not the anchor.
  CHECK(anchored(centroid).z() ==
        doctest::Approx(depth * g.source_to_detector).epsilon(1e-12));

  CHECK_THROWS_AS(init_ap_centroid(lms, app, g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(init_ap_centroid(lms, app, g, 1.0), std::invalid_argument);
  LandmarkMap3 missing = lms;
  missing.erase("SPS_l");
  CHECK_THROWS_AS(init_ap_centroid(missing, app, g, depth), std::invalid_argument);
}
