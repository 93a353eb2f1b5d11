#include "fregi/phantom.hpp"

#include "fregi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fregi {

namespace {

struct Capsule {
  Vec3 a, b;
  double r;

  bool contains(const Vec3& p) const {
    const Vec3 d = b - a;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * d)).squaredNorm() <= r * r;
  }
};

struct EllipsoidShell {
  Vec3 c, semi;
  double r_min, r_max;  // inclusive normalized-radius band; r_min 0 = solid

  bool contains(const Vec3& p) const {
    const Vec3 q = (p - c).cwiseQuotient(semi);
    const double r2 = q.squaredNorm();
    return r2 >= r_min * r_min && r2 <= r_max * r_max;
  }
};

struct SphereShell {
  Vec3 c;
  double r_min, r_max;

  bool contains(const Vec3& p) const {
    const double r2 = (p - c).squaredNorm();
    return r2 >= r_min * r_min && r2 <= r_max * r_max;
  }
};

Vec3 mirror(const Vec3& p, double side) { return {side * p.x(), p.y(), p.z()}; }

// Additive cosine-wave field giving low-frequency internal density variation.
struct TextureField {
  struct Wave {
    Vec3 k;
    double phase;
  };
  std::vector<Wave> waves;

  explicit TextureField(std::uint64_t seed) {
    RandomStream rs(seed, 0x7e37);
    for (int i = 0; i < 6; ++i) {
      Vec3 dir;
      double n2 = 0.0;
      do {
        dir = Vec3(rs.gauss(0.0, 1.0), rs.gauss(0.0, 1.0), rs.gauss(0.0, 1.0));
        n2 = dir.squaredNorm();
      } while (n2 < 1e-12);
      dir /= std::sqrt(n2);
      const double wavelength = rs.uniform(18.0, 45.0);
      waves.push_back({dir * (2.0 * kPi / wavelength), rs.uniform(0.0, 2.0 * kPi)});
    }
  }

  double operator()(const Vec3& p) const {
    double t = 0.0;
    for (const auto& w : waves) t += std::cos(w.k.dot(p) + w.phase);
    return t / double(waves.size());
  }
};

}  // namespace

Scene build_phantom(const PhantomSpec& spec) {
  if (spec.dim < 8) throw std::invalid_argument("build_phantom: dim must be >= 8");
  if (spec.spacing_mm <= 0.0) {
    throw std::invalid_argument("build_phantom: spacing must be positive");
  }

  const int n = spec.dim;
  const double h = spec.spacing_mm;
  const double half = 0.5 * (n - 1) * h;
  const Vec3 spacing(h, h, h);
  const Vec3 origin(-half, -half, -half);

  // Left-side primitives; the right side mirrors x.
  const EllipsoidShell wing{{55, 45, -5}, {38, 42, 30}, 0.72, 1.0};
  const SphereShell cup{{36, -18, 2}, 13.0, 18.0};  // kept to y >= -14 below
  const Capsule sup_ramus{{46, 2, 12}, {10, -26, 10}, 6.5};
  const Capsule inf_ramus{{10, -34, 4}, {30, -58, 0}, 6.5};
  const Capsule ischium{{46, -10, -20}, {32, -56, -16}, 7.0};

  const SphereShell fem_head{{36, -18, 2}, 0.0, 12.0};
  const Capsule fem_neck{{36, -18, 2}, {52, -34, 0}, 7.0};
  const Capsule fem_shaft{{52, -34, 0}, {55, -92, -2}, 9.0};
  const SphereShell troch_major{{58, -32, 2}, 0.0, 7.5};
  const SphereShell troch_minor{{46, -44, 6}, 0.0, 5.5};

  const EllipsoidShell vert_a{{0, 66, -28}, {16, 8, 12}, 0.0, 1.0};
  const EllipsoidShell vert_b{{0, 84, -30}, {16, 8, 12}, 0.0, 1.0};
  const EllipsoidShell sacrum{{0, 40, -34}, {24, 26, 14}, 0.0, 1.0};

  const double symphysis_gap = 4.0;  // pelvis material carved out for |x| < gap

  auto in_hemipelvis = [&](const Vec3& p, double side) {
    if (std::abs(p.x()) < symphysis_gap) return false;
    const Vec3 q = mirror(p, side);
    if (q.x() < 0.0) return false;  // each half stays on its own side
    if (wing.contains(q)) return true;
    if (q.y() >= -14.0 && cup.contains(q)) return true;
    return sup_ramus.contains(q) || inf_ramus.contains(q) || ischium.contains(q);
  };
  auto in_femur = [&](const Vec3& p, double side) {
    const Vec3 q = mirror(p, side);
    return fem_head.contains(q) || fem_neck.contains(q) || fem_shaft.contains(q) ||
           troch_major.contains(q) || troch_minor.contains(q);
  };

  const TextureField texture(spec.seed);
  auto mu_at = [&](const Vec3& p) {
    const double v = spec.bone_mu * (1.0 + spec.texture_amp * texture(p));
    return float(std::max(v, 0.1 * spec.bone_mu));
  };

  ObjectModel pelvis, femur_l, femur_r;
  pelvis.name = "pelvis";
  femur_l.name = "femur_l";
  femur_r.name = "femur_r";
  for (ObjectModel* o : {&pelvis, &femur_l, &femur_r}) {
    o->intensity_volume = Volume3D(n, n, n, spacing, origin);
    o->label_volume = LabelVolume3D(n, n, n, spacing, origin);
  }

  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const Vec3 p = origin + Vec3(x * h, y * h, z * h);

        std::uint8_t pelvis_cls = 0;
        if (in_hemipelvis(p, +1.0)) {
          pelvis_cls = std::uint8_t(AnatomyClass::hemipelvis_l);
        } else if (in_hemipelvis(p, -1.0)) {
          pelvis_cls = std::uint8_t(AnatomyClass::hemipelvis_r);
        } else if (vert_a.contains(p) || vert_b.contains(p)) {
          pelvis_cls = std::uint8_t(AnatomyClass::vertebrae);
        } else if (sacrum.contains(p)) {
          pelvis_cls = std::uint8_t(AnatomyClass::sacrum);
        }
        if (pelvis_cls != 0) {
          pelvis.label_volume.at(x, y, z) = pelvis_cls;
          pelvis.intensity_volume.at(x, y, z) = mu_at(p);
        }

        if (in_femur(p, +1.0)) {
          femur_l.label_volume.at(x, y, z) = std::uint8_t(AnatomyClass::femur_l);
          femur_l.intensity_volume.at(x, y, z) = mu_at(p);
        }
        if (in_femur(p, -1.0)) {
          femur_r.label_volume.at(x, y, z) = std::uint8_t(AnatomyClass::femur_r);
          femur_r.intensity_volume.at(x, y, z) = mu_at(p);
        }
      }
    }
  }

  // Landmarks sit inside their owning body's material (left side listed;
  // the right side mirrors x).
  const std::vector<std::pair<std::string, Vec3>> pelvis_lms = {
      {"GSN", {47.5, 12, -14}}, {"IOF", {24, -50, 2}}, {"MOF", {12, -28, 9}},
      {"SPS", {9, -25, 11}},    {"IPS", {10, -35, 4}}, {"ASIS", {60, 78, 6}},
  };
  for (const auto& [site, p] : pelvis_lms) {
    pelvis.landmarks3d[site + "_l"] = p;
    pelvis.landmarks3d[site + "_r"] = mirror(p, -1.0);
  }
  femur_l.landmarks3d["FH_l"] = Vec3(36, -18, 2);
  femur_r.landmarks3d["FH_r"] = Vec3(-36, -18, 2);

  Scene scene;
  scene.objects = {std::move(pelvis), std::move(femur_l), std::move(femur_r)};
  return scene;
}

}  // namespace fregi
