#include "fregi/annotate.hpp"

#include "fregi/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fregi {

namespace {

using nlohmann::json;

// Symmetric edge reflection for out-of-range indices: ...cba|abc|cba...
int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i = ((i % period) + period) % period;
  return i < n ? i : period - 1 - i;
}

float sample_bilinear_reflect(const Image2D& img, double r, double c) {
  const int r0 = int(std::floor(r));
  const int c0 = int(std::floor(c));
  const double fr = r - r0;
  const double fc = c - c0;
  const float v00 = img.at(reflect_index(r0, img.rows), reflect_index(c0, img.cols));
  const float v01 = img.at(reflect_index(r0, img.rows), reflect_index(c0 + 1, img.cols));
  const float v10 = img.at(reflect_index(r0 + 1, img.rows), reflect_index(c0, img.cols));
  const float v11 = img.at(reflect_index(r0 + 1, img.rows), reflect_index(c0 + 1, img.cols));
  const double top = v00 * (1.0 - fc) + v01 * fc;
  const double bot = v10 * (1.0 - fc) + v11 * fc;
  return float(top * (1.0 - fr) + bot * fr);
}

std::uint8_t sample_nearest_reflect(const LabelImage2D& lbl, double r, double c) {
  const int ri = reflect_index(int(std::lround(r)), lbl.rows);
  const int ci = reflect_index(int(std::lround(c)), lbl.cols);
  return lbl.at(ri, ci);
}

void min_max(const Image2D& img, float* lo, float* hi) {
  float mn = img.pixels.empty() ? 0.0f : img.pixels[0];
  float mx = mn;
  for (float v : img.pixels) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  *lo = mn;
  *hi = mx;
}

json landmarks_to_json(const LandmarkMap2& lms) {
  json j = json::object();
  for (const auto& [name, lm] : lms) {
    j[name] = {{"row", lm.pixel.x()}, {"col", lm.pixel.y()}, {"visible", lm.visible}};
  }
  return j;
}

LandmarkMap2 landmarks_from_json(const json& j) {
  LandmarkMap2 out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    Landmark2D lm;
    lm.pixel = Vec2(it.value().at("row").get<double>(), it.value().at("col").get<double>());
    lm.visible = it.value().at("visible").get<bool>();
    out[it.key()] = lm;
  }
  return out;
}

}  // namespace

const Heatmap* AnnotationSet::find_heatmap(const std::string& name) const {
  for (const auto& h : heatmaps) {
    if (h.name == name) return &h;
  }
  return nullptr;
}

AnnotationSet generate_annotations(const Scene& scene, const ProjectionGeometry& g,
                                   const MultiBodyPose& gt_pose, double sigma_px) {
  AnnotationSet ann;
  ann.labels = project_labels(scene.objects, g, gt_pose);
  ann.landmarks = project_landmarks(scene.objects, g, gt_pose);
  ann.pose = gt_pose;
  ann.geometry = g;
  ann.sigma_px = sigma_px;
  for (const auto& [name, lm] : ann.landmarks) {
    Landmark2D snapped = lm;
    if (lm.visible) {
      snapped.pixel = Vec2(std::round(lm.pixel.x()), std::round(lm.pixel.y()));
    }
    ann.heatmaps.push_back(make_heatmap(snapped, g.rows, g.cols, sigma_px, name));
  }
  return ann;
}

std::pair<Image2D, AnnotationSet> augment(const Image2D& img, const AnnotationSet& ann,
                                          const AugmentParams& params,
                                          std::uint64_t seed) {
  if (img.rows < 2 || img.cols < 2) {
    throw std::invalid_argument("augment: image too small");
  }
  RandomStream rng(seed);
  Image2D out = img;
  AnnotationSet out_ann = ann;
  out_ann.seed = seed;

  // 1. Intensity inversion: flip about the intensity range.
  if (rng.bernoulli(params.invert_prob)) {
    float lo, hi;
    min_max(out, &lo, &hi);
    for (float& v : out.pixels) v = lo + hi - v;
  }

  // 2. Additive Gaussian noise, sigma as a fraction of the intensity range.
  {
    const double frac = rng.uniform(params.noise_sigma_lo, params.noise_sigma_hi);
    float lo, hi;
    min_max(out, &lo, &hi);
    const double sigma = frac * std::max(1e-12, double(hi) - double(lo));
    for (float& v : out.pixels) v = float(v + rng.gauss(0.0, sigma));
  }

  // 3. Gamma on min-max normalized intensities, rescaled back.
  {
    const double gamma = rng.uniform(params.gamma_lo, params.gamma_hi);
    float lo, hi;
    min_max(out, &lo, &hi);
    const double range = double(hi) - double(lo);
    if (range > 1e-12) {
      for (float& v : out.pixels) {
        const double t = (double(v) - lo) / range;
        v = float(lo + range * std::pow(t, gamma));
      }
    }
  }

  // 4. Affine warp about the image center: rotation, shear, isotropic scale,
  // then translation with uniformly sampled direction.
  AffineWarp warp;
  {
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    const double mag = rng.uniform(0.0, params.translate_px_max);
    const double rot = deg2rad(rng.uniform(-params.rotate_deg_max, params.rotate_deg_max));
    const double shear = deg2rad(rng.uniform(-params.shear_deg_max, params.shear_deg_max));
    const double scale = rng.uniform(params.scale_lo, params.scale_hi);

    Mat2 rot_m;
    rot_m << std::cos(rot), -std::sin(rot), std::sin(rot), std::cos(rot);
    Mat2 shear_m;
    shear_m << 1.0, std::tan(shear), 0.0, 1.0;
    warp.linear = rot_m * shear_m * scale;
    warp.offset = mag * Vec2(std::cos(dir), std::sin(dir));
    warp.center = Vec2(0.5 * (img.rows - 1), 0.5 * (img.cols - 1));

    Image2D warped(out.rows, out.cols, out.pixel_spacing);
    for (int r = 0; r < out.rows; ++r) {
      for (int c = 0; c < out.cols; ++c) {
        const Vec2 src = warp.invert(Vec2(double(r), double(c)));
        warped.at(r, c) = sample_bilinear_reflect(out, src.x(), src.y());
      }
    }
    out = std::move(warped);

    LabelImage2D warped_lbl(ann.labels.rows, ann.labels.cols);
    for (int r = 0; r < warped_lbl.rows; ++r) {
      for (int c = 0; c < warped_lbl.cols; ++c) {
        const Vec2 src = warp.invert(Vec2(double(r), double(c)));
        warped_lbl.at(r, c) = sample_nearest_reflect(ann.labels, src.x(), src.y());
      }
    }
    out_ann.labels = std::move(warped_lbl);

    for (auto& [name, lm] : out_ann.landmarks) {
      if (!lm.visible) continue;
      lm.pixel = warp.apply(lm.pixel);
      const double rr = std::round(lm.pixel.x());
      const double cc = std::round(lm.pixel.y());
      lm.visible = rr >= 0.0 && rr <= img.rows - 1 && cc >= 0.0 && cc <= img.cols - 1;
    }
    for (auto& hm : out_ann.heatmaps) {
      const auto it = out_ann.landmarks.find(hm.name);
      const bool still_visible = it != out_ann.landmarks.end() && it->second.visible;
      if (!still_visible) {
        hm.values = Image2D(hm.values.rows, hm.values.cols);
        continue;
      }
      Image2D warped_hm(hm.values.rows, hm.values.cols, hm.values.pixel_spacing);
      for (int r = 0; r < warped_hm.rows; ++r) {
        for (int c = 0; c < warped_hm.cols; ++c) {
          const Vec2 src = warp.invert(Vec2(double(r), double(c)));
          warped_hm.at(r, c) = sample_bilinear_reflect(hm.values, src.x(), src.y());
        }
      }
      hm.values = std::move(warped_hm);
    }
  }

  // 5. Local corruption: a few rectangles flooded with strong noise.
  if (rng.bernoulli(params.corrupt_prob)) {
    const int count = 1 + int(rng.uint_below(std::uint64_t(params.corrupt_regions_max)));
    const double d = params.corrupt_dim_frac * out.cols;
    for (int k = 0; k < count; ++k) {
      int h = 0, w = 0, r0 = 0, c0 = 0;
      bool placed = false;
      for (int tries = 0; tries < 256 && !placed; ++tries) {
        h = std::max(1, int(std::lround(rng.gauss(d, d))));
        w = std::max(1, int(std::lround(rng.gauss(d, d))));
        if (h > out.rows || w > out.cols) continue;
        r0 = int(rng.uint_below(std::uint64_t(out.rows)));
        c0 = int(rng.uint_below(std::uint64_t(out.cols)));
        placed = (r0 + h <= out.rows) && (c0 + w <= out.cols);
      }
      if (!placed) continue;
      float lo = out.at(r0, c0), hi = lo;
      for (int r = r0; r < r0 + h; ++r) {
        for (int c = c0; c < c0 + w; ++c) {
          lo = std::min(lo, out.at(r, c));
          hi = std::max(hi, out.at(r, c));
        }
      }
      const double sigma = params.corrupt_noise_frac * std::max(1e-12, double(hi) - double(lo));
      for (int r = r0; r < r0 + h; ++r) {
        for (int c = c0; c < c0 + w; ++c) {
          out.at(r, c) = float(out.at(r, c) + rng.gauss(0.0, sigma));
        }
      }
    }
  }

  return {std::move(out), std::move(out_ann)};
}

void write_annotation_bundle(const std::filesystem::path& dir, const Image2D& image,
                             const AnnotationSet& ann) {
  std::filesystem::create_directories(dir);
  write_image(dir / "image.json", image);
  write_image(dir / "labels.json", ann.labels);

  {
    std::ofstream os(dir / "landmarks.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "landmarks.json").string());
    os << landmarks_to_json(ann.landmarks).dump(2) << "\n";
  }

  // Heatmaps stack into one volume, one z-slice per landmark.
  {
    Volume3D stack;
    stack.nx = ann.labels.cols;
    stack.ny = ann.labels.rows;
    stack.nz = std::max<std::size_t>(1, ann.heatmaps.size());
    stack.spacing = Vec3(1.0, 1.0, 1.0);
    stack.origin = Vec3::Zero();
    stack.voxels.assign(std::size_t(stack.nx) * stack.ny * stack.nz, 0.0f);
    for (std::size_t k = 0; k < ann.heatmaps.size(); ++k) {
      const Image2D& hv = ann.heatmaps[k].values;
      std::copy(hv.pixels.begin(), hv.pixels.end(),
                stack.voxels.begin() + k * hv.pixels.size());
    }
    write_volume(dir / "heatmaps.json", stack);
    json names = json::array();
    for (const auto& h : ann.heatmaps) names.push_back(h.name);
    json meta = json::parse(std::ifstream(dir / "heatmaps.json"));
    meta["landmark_names"] = names;
    std::ofstream os(dir / "heatmaps.json");
    os << meta.dump(2) << "\n";
  }

  {
    json prov;
    prov["pose"] = {{"pelvis", json::parse(pose_to_json(ann.pose.pelvis))},
                    {"femur_l", json::parse(pose_to_json(ann.pose.femur_l))},
                    {"femur_r", json::parse(pose_to_json(ann.pose.femur_r))}};
    prov["geometry"] = json::parse(ann.geometry.to_json());
    prov["sigma_px"] = ann.sigma_px;
    prov["seed"] = ann.seed;
    std::ofstream os(dir / "provenance.json");
    if (!os) throw std::runtime_error("cannot write " + (dir / "provenance.json").string());
    os << prov.dump(2) << "\n";
  }
}

std::pair<Image2D, AnnotationSet> read_annotation_bundle(const std::filesystem::path& dir) {
  Image2D image = read_image_f32(dir / "image.json");
  AnnotationSet ann;
  ann.labels = read_image_u8(dir / "labels.json");

  {
    std::ifstream is(dir / "landmarks.json");
    if (!is) throw std::runtime_error("cannot read " + (dir / "landmarks.json").string());
    ann.landmarks = landmarks_from_json(json::parse(is));
  }

  {
    std::ifstream is(dir / "heatmaps.json");
    if (!is) throw std::runtime_error("cannot read " + (dir / "heatmaps.json").string());
    const json meta = json::parse(is);
    const Volume3D stack = read_volume_f32(dir / "heatmaps.json");
    std::vector<std::string> names;
    for (const auto& n : meta.at("landmark_names")) names.push_back(n.get<std::string>());
    for (std::size_t k = 0; k < names.size(); ++k) {
      Heatmap h;
      h.name = names[k];
      h.values = Image2D(stack.ny, stack.nx);
      std::copy(stack.voxels.begin() + k * h.values.pixels.size(),
                stack.voxels.begin() + (k + 1) * h.values.pixels.size(),
                h.values.pixels.begin());
      ann.heatmaps.push_back(std::move(h));
    }
  }

  {
    std::ifstream is(dir / "provenance.json");
    if (!is) throw std::runtime_error("cannot read " + (dir / "provenance.json").string());
    const json prov = json::parse(is);
    ann.pose.pelvis = pose_from_json(prov.at("pose").at("pelvis").dump());
    ann.pose.femur_l = pose_from_json(prov.at("pose").at("femur_l").dump());
    ann.pose.femur_r = pose_from_json(prov.at("pose").at("femur_r").dump());
    ann.geometry = ProjectionGeometry::from_json(prov.at("geometry").dump());
    ann.sigma_px = prov.at("sigma_px").get<double>();
    ann.seed = prov.at("seed").get<std::uint64_t>();
  }
  return {std::move(image), std::move(ann)};
}

}  // namespace fregi
