#include "fregi/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fregi {

namespace {

// Ray-marching context for one posed volume: the world ray is pulled into
// continuous voxel coordinates once, so the inner loop is pure arithmetic.
struct RaySampler {
  const float* data = nullptr;
  int nx = 0, ny = 0, nz = 0;
  Vec3 src_vox;   // source position, voxel coords
  Vec3 dir_vox;   // world unit direction scaled into voxel coords per mm

  RaySampler(const VoxelGrid<float>& v, const RigidPose& pose) {
    data = v.voxels.data();
    nx = v.nx;
    ny = v.ny;
    nz = v.nz;
    const RigidPose inv = pose.inverse();
    const Vec3 src_obj = inv.translation;  // world origin in object frame
    src_vox = (src_obj - v.origin).cwiseQuotient(v.spacing);
    inv_rot_ = inv.rotation;
    inv_spacing_ = v.spacing.cwiseInverse();
  }

  // Prepares marching along the world-frame unit direction u.  Returns false
  // when the ray misses the volume; otherwise [t0, t1] holds the parameter
  // range (mm from the source) inside the volume bounds.
  bool clip(const Vec3& u_world, double* t0, double* t1) {
    dir_vox = (inv_rot_ * u_world).cwiseProduct(inv_spacing_);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    const double hi_bound[3] = {double(nx - 1), double(ny - 1), double(nz - 1)};
    for (int a = 0; a < 3; ++a) {
      const double d = dir_vox[a];
      const double s = src_vox[a];
      if (std::abs(d) < 1e-14) {
        if (s < 0.0 || s > hi_bound[a]) return false;
        continue;
      }
      double ta = (0.0 - s) / d;
      double tb = (hi_bound[a] - s) / d;
      if (ta > tb) std::swap(ta, tb);
      lo = std::max(lo, ta);
      hi = std::min(hi, tb);
    }
    if (hi <= lo) return false;
    *t0 = lo;
    *t1 = hi;
    return true;
  }

  float sample(double t) const {
    const double x = src_vox.x() + t * dir_vox.x();
    const double y = src_vox.y() + t * dir_vox.y();
    const double z = src_vox.z() + t * dir_vox.z();
    int ix = int(x);
    int iy = int(y);
    int iz = int(z);
    // Midpoint samples sit strictly inside [0, n-1]; the clamp only absorbs
    // floating-point residue on rays that graze a face.
    ix = std::clamp(ix, 0, nx - 2);
    iy = std::clamp(iy, 0, ny - 2);
    iz = std::clamp(iz, 0, nz - 2);
    const double fx = std::clamp(x - ix, 0.0, 1.0);
    const double fy = std::clamp(y - iy, 0.0, 1.0);
    const double fz = std::clamp(z - iz, 0.0, 1.0);
    const std::size_t i000 = std::size_t(iz) * ny * nx + std::size_t(iy) * nx + ix;
    const float* p0 = data + i000;
    const float* p1 = p0 + std::size_t(ny) * nx;
    const double c00 = p0[0] * (1.0 - fx) + p0[1] * fx;
    const double c10 = p0[nx] * (1.0 - fx) + p0[nx + 1] * fx;
    const double c01 = p1[0] * (1.0 - fx) + p1[1] * fx;
    const double c11 = p1[nx] * (1.0 - fx) + p1[nx + 1] * fx;
    const double c0 = c00 * (1.0 - fy) + c10 * fy;
    const double c1 = c01 * (1.0 - fy) + c11 * fy;
    return float(c0 * (1.0 - fz) + c1 * fz);
  }

 private:
  Mat3 inv_rot_;
  Vec3 inv_spacing_;
};

Vec3 pixel_ray_direction(const ProjectionGeometry& g, int row, int col) {
  const Vec3 target = g.pixel_to_world(double(row), double(col));
  return target.normalized();
}

// Integrates the field along [t0, t1] with the midpoint rule.  The interval
// is partitioned exactly, with the substep shrunk so it never exceeds step_mm.
double integrate_ray(const RaySampler& s, double t0, double t1, double step_mm) {
  const double len = t1 - t0;
  const int n = std::max(1, int(std::ceil(len / step_mm - 1e-12)));
  const double h = len / n;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    acc += s.sample(t0 + (k + 0.5) * h);
  }
  return acc * h;
}

// First parameter t where the mask field rises above 0.5, or +inf.
double first_hit(const RaySampler& s, double t0, double t1, double step_mm) {
  const double len = t1 - t0;
  const int n = std::max(1, int(std::ceil(len / step_mm - 1e-12)));
  const double h = len / n;
  for (int k = 0; k < n; ++k) {
    const double t = t0 + (k + 0.5) * h;
    if (s.sample(t) > 0.5f) return t;
  }
  return std::numeric_limits<double>::infinity();
}

Volume3D class_mask(const LabelVolume3D& labels, AnatomyClass cls) {
  Volume3D m;
  m.nx = labels.nx;
  m.ny = labels.ny;
  m.nz = labels.nz;
  m.spacing = labels.spacing;
  m.origin = labels.origin;
  m.voxels.resize(labels.voxels.size());
  const uint8_t want = static_cast<uint8_t>(cls);
  for (std::size_t i = 0; i < labels.voxels.size(); ++i) {
    m.voxels[i] = (labels.voxels[i] == want) ? 1.0f : 0.0f;
  }
  return m;
}

}  // namespace

const RigidPose& MultiBodyPose::pose_for(const std::string& object_name) const {
  if (object_name == "pelvis") return pelvis;
  if (object_name == "femur_l") return femur_l;
  if (object_name == "femur_r") return femur_r;
  throw std::invalid_argument("unknown object name: " + object_name);
}

RigidPose& MultiBodyPose::pose_for(const std::string& object_name) {
  if (object_name == "pelvis") return pelvis;
  if (object_name == "femur_l") return femur_l;
  if (object_name == "femur_r") return femur_r;
  throw std::invalid_argument("unknown object name: " + object_name);
}

const ObjectModel& Scene::object(const std::string& name) const {
  for (const auto& o : objects) {
    if (o.name == name) return o;
  }
  throw std::invalid_argument("scene has no object named " + name);
}

LandmarkMap3 Scene::all_landmarks() const {
  LandmarkMap3 all;
  for (const auto& o : objects) {
    for (const auto& [lname, p] : o.landmarks3d) all[lname] = p;
  }
  return all;
}

Image2D render_drr_object(const ObjectModel& obj, const ProjectionGeometry& g,
                          const RigidPose& pose, double step_mm) {
  g.validate();
  if (step_mm <= 0.0) throw std::invalid_argument("render_drr: step_mm must be positive");
  if (obj.intensity_volume.nx < 2 || obj.intensity_volume.ny < 2 ||
      obj.intensity_volume.nz < 2) {
    throw std::invalid_argument("render_drr: volume needs at least 2 voxels per axis");
  }
  Image2D img;
  img.rows = g.rows;
  img.cols = g.cols;
  img.pixel_spacing = g.pixel_spacing;
  img.pixels.assign(std::size_t(g.rows) * g.cols, 0.0f);

  RaySampler sampler(obj.intensity_volume, pose);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const Vec3 u = pixel_ray_direction(g, r, c);
      double t0 = 0.0, t1 = 0.0;
      if (!sampler.clip(u, &t0, &t1)) continue;
      img.pixels[std::size_t(r) * g.cols + c] =
          float(integrate_ray(sampler, t0, t1, step_mm));
    }
  }
  return img;
}

Image2D render_drr(const std::vector<ObjectModel>& objs, const ProjectionGeometry& g,
                   const MultiBodyPose& pose, double step_mm) {
  if (objs.empty()) throw std::invalid_argument("render_drr: no objects");
  Image2D acc;
  bool first = true;
  for (const auto& o : objs) {
    Image2D part = render_drr_object(o, g, pose.pose_for(o.name), step_mm);
    if (first) {
      acc = std::move(part);
      first = false;
    } else {
      for (std::size_t i = 0; i < acc.pixels.size(); ++i) acc.pixels[i] += part.pixels[i];
    }
  }
  return acc;
}

LabelImage2D project_labels(const std::vector<ObjectModel>& objs,
                            const ProjectionGeometry& g, const MultiBodyPose& pose,
                            double step_mm) {
  g.validate();
  if (step_mm <= 0.0) throw std::invalid_argument("project_labels: step_mm must be positive");

  // One rasterizable mask per class, paired with the pose of the body that
  // owns it.  Order encodes precedence: femurs, hemipelves, vertebrae, sacrum.
  struct ClassRay {
    AnatomyClass cls;
    Volume3D mask;
    RaySampler sampler;
    int tier;  // 0 femur, 1 hemipelvis, 2 vertebrae, 3 sacrum
  };
  std::vector<ClassRay> rays;
  auto add_mask = [&](const ObjectModel& o, AnatomyClass cls, int tier) {
    Volume3D m = class_mask(o.label_volume, cls);
    bool any = false;
    for (float v : m.voxels) {
      if (v > 0.0f) {
        any = true;
        break;
      }
    }
    if (!any) return;
    RaySampler s(m, pose.pose_for(o.name));
    rays.push_back({cls, std::move(m), s, tier});
    rays.back().sampler.data = rays.back().mask.voxels.data();
  };
  for (const auto& o : objs) {
    if (o.name == "femur_l") add_mask(o, AnatomyClass::femur_l, 0);
    if (o.name == "femur_r") add_mask(o, AnatomyClass::femur_r, 0);
    if (o.name == "pelvis") {
      add_mask(o, AnatomyClass::hemipelvis_l, 1);
      add_mask(o, AnatomyClass::hemipelvis_r, 1);
      add_mask(o, AnatomyClass::vertebrae, 2);
      add_mask(o, AnatomyClass::sacrum, 3);
    }
  }

  LabelImage2D out(g.rows, g.cols, 0);

  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const Vec3 u = pixel_ray_direction(g, r, c);
      uint8_t label = 0;
      int best_tier = 4;
      double best_depth = std::numeric_limits<double>::infinity();
      for (auto& cr : rays) {
        if (cr.tier > best_tier) continue;
        double t0 = 0.0, t1 = 0.0;
        if (!cr.sampler.clip(u, &t0, &t1)) continue;
        const double t = first_hit(cr.sampler, t0, t1, step_mm);
        if (!std::isfinite(t)) continue;
        if (cr.tier < best_tier || t < best_depth) {
          best_tier = cr.tier;
          best_depth = t;
          label = static_cast<uint8_t>(cr.cls);
        }
      }
      out.labels[std::size_t(r) * g.cols + c] = label;
    }
  }
  return out;
}

LandmarkMap2 project_landmarks(const std::vector<ObjectModel>& objs,
                               const ProjectionGeometry& g, const MultiBodyPose& pose) {
  g.validate();
  LandmarkMap2 out;
  for (const auto& o : objs) {
    const RigidPose& p = pose.pose_for(o.name);
    for (const auto& [name, pt] : o.landmarks3d) {
      const ProjectedPoint pp = project_point(g, p, pt);
      Landmark2D lm;
      lm.pixel = pp.pixel;
      const double rr = std::round(pp.pixel.x());
      const double cc = std::round(pp.pixel.y());
      lm.visible = !pp.clamped && rr >= 0.0 && rr <= g.rows - 1 && cc >= 0.0 &&
                   cc <= g.cols - 1;
      out[name] = lm;
    }
  }
  return out;
}

}  // namespace fregi
