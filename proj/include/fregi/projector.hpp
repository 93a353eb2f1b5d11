#pragma once

#include "fregi/geometry.hpp"
#include "fregi/imaging.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fregi {

// One rigid body: masked intensity volume, its labels, and the 3D landmarks
// that ride with it.  All volumes share the common anatomy coordinate frame.
struct ObjectModel {
  std::string name;  // "pelvis", "femur_l", "femur_r"
  Volume3D intensity_volume;
  LabelVolume3D label_volume;
  LandmarkMap3 landmarks3d;
};

struct MultiBodyPose {
  RigidPose pelvis;
  RigidPose femur_l;
  RigidPose femur_r;

  const RigidPose& pose_for(const std::string& object_name) const;
  RigidPose& pose_for(const std::string& object_name);

  static MultiBodyPose uniform(const RigidPose& p) { return {p, p, p}; }
};

struct Scene {
  std::vector<ObjectModel> objects;

  const ObjectModel& object(const std::string& name) const;
  // Union of all objects' landmarks, in anatomy coordinates.
  LandmarkMap3 all_landmarks() const;
};

// Line-integral DRR for a single posed object.  Each detector pixel
// accumulates the trilinear field along the source-to-pixel ray, midpoint
// sampled with step <= step_mm inside the volume bounds.
Image2D render_drr_object(const ObjectModel& obj, const ProjectionGeometry& g,
                          const RigidPose& pose, double step_mm);

// Sum of the per-object line integrals.
Image2D render_drr(const std::vector<ObjectModel>& objs, const ProjectionGeometry& g,
                   const MultiBodyPose& pose, double step_mm = 1.0);

// Per-pixel anatomy class, by ray casting with precedence
// femur > hemipelvis > vertebrae > sacrum > background.  Femur ties and
// hemipelvis ties go to the body nearer the source.
LabelImage2D project_labels(const std::vector<ObjectModel>& objs,
                            const ProjectionGeometry& g, const MultiBodyPose& pose,
                            double step_mm = 1.0);

struct Landmark2D {
  Vec2 pixel{0.0, 0.0};  // (row, col)
  bool visible = false;
};

using LandmarkMap2 = std::map<std::string, Landmark2D>;

// Projects each object's landmarks with that object's pose; a landmark is
// visible when its nearest raster pixel lies on the detector and the point is
// in front of the source.
LandmarkMap2 project_landmarks(const std::vector<ObjectModel>& objs,
                               const ProjectionGeometry& g, const MultiBodyPose& pose);

std::string multibody_pose_to_json(const MultiBodyPose& p);
MultiBodyPose multibody_pose_from_json(const std::string& text);

// Scene directory IO: a scene.json manifest with per-object landmark tables,
// next to <name>_intensity.{json,raw} and <name>_labels.{json,raw} volumes.
void write_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_scene(const std::filesystem::path& dir);

}  // namespace fregi
