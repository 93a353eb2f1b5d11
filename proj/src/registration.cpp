#include "fregi/registration.hpp"

#include "fregi/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace fregi {

namespace {

using nlohmann::json;

VecX vec6(double a, double b, double c, double d, double e, double f) {
  VecX v(6);
  v << a, b, c, d, e, f;
  return v;
}

// World-frame perturbation about a center: rotation by v[0..2] (degrees,
// axes given by axis columns) followed by translation v[3..5] (mm), applied
// on top of the reference pose.
RigidPose perturb_about(const RigidPose& ref, const Eigen::Ref<const VecX>& v,
                        const Vec3& center_w, const Mat3& axes) {
  const Vec3 w(deg2rad(v[0]), deg2rad(v[1]), deg2rad(v[2]));
  const Mat3 rot = axes * so3_exp_matrix(w) * axes.transpose();
  const Vec3 t = v.size() >= 6 ? Vec3(v[3], v[4], v[5]) : Vec3::Zero();
  RigidPose out;
  out.rotation = rot * ref.rotation;
  out.translation = rot * (ref.translation - center_w) + center_w + t;
  return out;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RigidPose pose_from_femur_rotation(const Vec3& rot_deg, const Vec3& fh_center,
                                   const AppFrame& app) {
  const Vec3 w(deg2rad(rot_deg.x()), deg2rad(rot_deg.y()), deg2rad(rot_deg.z()));
  const Mat3& axes = app.pose.rotation;
  const Mat3 rot = axes * so3_exp_matrix(w) * axes.transpose();
  RigidPose out;
  out.rotation = rot;
  out.translation = fh_center - rot * fh_center;
  return out;
}

// --- stage objective ---------------------------------------------------------

StageObjective::StageObjective(const Scene& scene, const Image2D& image,
                               const ProjectionGeometry& g, const StagePlan& stage,
                               const MultiBodyPose& ref_pose, const AppFrame& app,
                               const RegWeights& reg, double render_step_mm,
                               const LandmarkMap2* detections,
                               const LabelImage2D* weight_labels)
    : scene_(scene), stage_(stage), ref_(ref_pose), app_(app), reg_(reg),
      step_mm_(render_step_mm), detections_(detections) {
  stage_g_ = stage.downsample > 1 ? g.downsampled(stage.downsample) : g;

  if (image.rows == stage_g_.rows && image.cols == stage_g_.cols) {
    fixed_ = image;
  } else if (image.rows == g.rows && image.cols == g.cols) {
    fixed_ = downsample(image, stage.downsample);
  } else {
    throw std::invalid_argument("stage objective: image dims match neither the "
                                "full nor the stage geometry");
  }

  pelvis_lms_ = scene.all_landmarks();
  auto lm = [&](const char* name) {
    auto it = pelvis_lms_.find(name);
    if (it == pelvis_lms_.end()) {
      throw std::invalid_argument(std::string("stage objective: scene lacks landmark ") + name);
    }
    return it->second;
  };
  const Vec3 fh_l_anat = lm("FH_l");
  const Vec3 fh_r_anat = lm("FH_r");
  pelvis_center_w_ = ref_.pelvis(0.5 * (fh_l_anat + fh_r_anat));
  fh_l_w_ = ref_.femur_l(fh_l_anat);
  fh_r_w_ = ref_.femur_r(fh_r_anat);

  // A femoral head detection pins the rotation center to its viewing ray at
  // the currently estimated depth.
  auto backproject_fh = [&](const char* name, Vec3* center) {
    if (!detections_) return;
    auto it = detections_->find(name);
    if (it == detections_->end() || !it->second.visible) return;
    const Vec3 ray = g.pixel_to_world(it->second.pixel.x(), it->second.pixel.y());
    if (ray.z() <= 1e-9) return;
    *center = ray * (center->z() / ray.z());
  };
  backproject_fh("FH_l", &fh_l_w_);
  backproject_fh("FH_r", &fh_r_w_);

  app_axes_w_ = ref_.pelvis.rotation * app_.pose.rotation;

  switch (stage_.target) {
    case StageTarget::pelvis:
      dim_ = 6;
      moving_ = {"pelvis", "femur_l", "femur_r"};
      break;
    case StageTarget::femur_l_rot:
      dim_ = 3;
      moving_ = {"femur_l"};
      break;
    case StageTarget::femur_r_rot:
      dim_ = 3;
      moving_ = {"femur_r"};
      break;
    case StageTarget::all_bodies:
      dim_ = 18;
      moving_ = {"pelvis", "femur_l", "femur_r"};
      break;
  }

  // Static DRR: objects the stage never moves, rendered once.
  static_drr_ = Image2D(stage_g_.rows, stage_g_.cols, stage_g_.pixel_spacing);
  for (const auto& o : scene_.objects) {
    if (std::find(moving_.begin(), moving_.end(), o.name) != moving_.end()) continue;
    const Image2D part = render_drr_object(o, stage_g_, ref_.pose_for(o.name), step_mm_);
    for (std::size_t i = 0; i < static_drr_.pixels.size(); ++i) {
      static_drr_.pixels[i] += part.pixels[i];
    }
  }

  if (stage_.use_patch_weights && weight_labels) {
    LabelImage2D lbl_stage;
    if (weight_labels->rows == stage_g_.rows && weight_labels->cols == stage_g_.cols) {
      lbl_stage = *weight_labels;
    } else {
      lbl_stage = downsample_labels(*weight_labels, stage_.downsample);
    }
    if (lbl_stage.rows != stage_g_.rows || lbl_stage.cols != stage_g_.cols) {
      throw std::invalid_argument("stage objective: weight label dims mismatch");
    }
    weights_ = patch_weights_from_labels(lbl_stage, stage_.weight_classes);
    double sum = 0.0;
    for (double w : weights_.w) sum += w;
    // An empty class mask at this resolution would zero the whole similarity;
    // fall back to uniform weighting instead.
    have_weights_ = sum > 0.0;
  }
}

MultiBodyPose StageObjective::pose_at(const VecX& params) const {
  if (params.size() != dim_) {
    throw std::invalid_argument("stage objective: parameter dimension mismatch");
  }
  MultiBodyPose p = ref_;
  switch (stage_.target) {
    case StageTarget::pelvis: {
      // The femurs ride along rigidly; their own stages refine them later.
      p.pelvis = perturb_about(ref_.pelvis, params, pelvis_center_w_, Mat3::Identity());
      p.femur_l = perturb_about(ref_.femur_l, params, pelvis_center_w_, Mat3::Identity());
      p.femur_r = perturb_about(ref_.femur_r, params, pelvis_center_w_, Mat3::Identity());
      break;
    }
    case StageTarget::femur_l_rot:
      p.femur_l = perturb_about(ref_.femur_l, params, fh_l_w_, app_axes_w_);
      break;
    case StageTarget::femur_r_rot:
      p.femur_r = perturb_about(ref_.femur_r, params, fh_r_w_, app_axes_w_);
      break;
    case StageTarget::all_bodies:
      p.pelvis = perturb_about(ref_.pelvis, params.segment(0, 6), pelvis_center_w_,
                               Mat3::Identity());
      p.femur_l = perturb_about(ref_.femur_l, params.segment(6, 6), fh_l_w_,
                                Mat3::Identity());
      p.femur_r = perturb_about(ref_.femur_r, params.segment(12, 6), fh_r_w_,
                                Mat3::Identity());
      break;
  }
  return p;
}

double StageObjective::similarity_at(const VecX& params) const {
  const MultiBodyPose p = pose_at(params);
  Image2D drr = static_drr_;
  for (const auto& name : moving_) {
    const Image2D part =
        render_drr_object(scene_.object(name), stage_g_, p.pose_for(name), step_mm_);
    for (std::size_t i = 0; i < drr.pixels.size(); ++i) drr.pixels[i] += part.pixels[i];
  }
  return patch_grad_ncc(fixed_, drr, have_weights_ ? &weights_ : nullptr);
}

double StageObjective::operator()(const VecX& params) const {
  const double sim = similarity_at(params);
  if (stage_.regularizer == StageRegularizer::none || stage_.lambda >= 1.0) {
    return stage_.lambda * sim;
  }
  double reg_val = 0.0;
  switch (stage_.regularizer) {
    case StageRegularizer::none:
      break;
    case StageRegularizer::de_plausibility: {
      const MultiBodyPose p = pose_at(params);
      reg_val = reg_de(p.pelvis, pelvis_lms_, stage_g_);
      break;
    }
    case StageRegularizer::euler_prior: {
      // The stage parameters are exactly the projective-frame decomposition of
      // the perturbation about the rotation center, so the prior reads off the
      // parameter vector directly.
      for (int i = 0; i < 6; ++i) {
        reg_val += params[i] * params[i] / (2.0 * reg_.euler_sigmas[i] * reg_.euler_sigmas[i]);
      }
      break;
    }
    case StageRegularizer::reprojection: {
      if (!detections_) {
        throw std::invalid_argument("stage objective: reprojection prior needs detections");
      }
      // Detections are stored at full resolution; rescale to stage pixels
      // (physical detector positions are preserved by the geometry mapping).
      LandmarkMap2 det_stage;
      const double f = double(stage_.downsample);
      for (const auto& [name, d] : *detections_) {
        if (!d.visible) continue;
        Landmark2D s = d;
        s.pixel = (d.pixel.array() - 0.5 * (f - 1.0)) / f;
        det_stage[name] = s;
      }
      const MultiBodyPose p = pose_at(params);
      reg_val = reg_reprojection(p.pelvis, pelvis_lms_, det_stage, stage_g_, reg_.sigma_l_mm);
      break;
    }
    case StageRegularizer::folded_rot: {
      const double angle = params.head(3).norm();
      reg_val = reg_folded_normal_rot(angle, reg_.folded_mu_deg, reg_.folded_sigma_deg);
      break;
    }
  }
  return stage_.lambda * sim + (1.0 - stage_.lambda) * reg_val;
}

double objective_eval(const Scene& scene, const Image2D& image,
                      const ProjectionGeometry& g, const StagePlan& stage,
                      const MultiBodyPose& ref_pose, const AppFrame& app,
                      const RegWeights& reg, double render_step_mm, const VecX& params,
                      const LandmarkMap2* detections,
                      const LabelImage2D* weight_labels) {
  StageObjective obj(scene, image, g, stage, ref_pose, app, reg, render_step_mm,
                     detections, weight_labels);
  return obj(params);
}

// --- shipped stage configurations -------------------------------------------

StagePlan PipelineConfig::pelvis_de_stage() const {
  StagePlan s;
  s.name = "pelvis_de";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::de;
  s.downsample = ds_coarse;
  s.lambda = reg.lambda;
  s.regularizer = StageRegularizer::de_plausibility;
  s.box = BoxConstraints::symmetric(vec6(60, 40, 10, 200, 200, 250));
  s.de = de;
  return s;
}

StagePlan PipelineConfig::pelvis_grid_stage_attempt1() const {
  StagePlan s;
  s.name = "pelvis_grid_a1";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::grid;
  s.downsample = ds_coarse;
  s.lambda = 1.0;
  s.box = BoxConstraints::symmetric(vec6(5, 5, 1, 10, 10, 50));
  s.grid_increments = vec6(1, 1, 1, 2, 2, 10);
  return s;
}

StagePlan PipelineConfig::pelvis_cmaes_stage(StageRegularizer reg_kind,
                                             const std::set<std::uint8_t>& weight_classes) const {
  StagePlan s;
  s.name = "pelvis_cmaes";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::cmaes;
  s.downsample = ds_mid;
  s.regularizer = reg_kind;
  s.lambda = reg_kind == StageRegularizer::none ? 1.0 : reg.lambda;
  s.cmaes = cmaes_pelvis;
  s.cmaes_sigma = vec6(15, 15, 30, 50, 50, 100);
  s.use_patch_weights = !weight_classes.empty();
  s.weight_classes = weight_classes;
  return s;
}

StagePlan PipelineConfig::pelvis_bobyqa_stage_attempt1() const {
  StagePlan s;
  s.name = "pelvis_bobyqa_a1";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::bobyqa;
  s.downsample = ds_fine;
  s.lambda = 1.0;
  s.box = BoxConstraints::symmetric(vec6(2.5, 2.5, 2.5, 5, 5, 10));
  s.bobyqa = bobyqa_pelvis;
  return s;
}

StagePlan PipelineConfig::pelvis_grid_stage_attempt2() const {
  StagePlan s;
  s.name = "pelvis_grid_a2";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::grid;
  s.downsample = ds_coarse;
  s.lambda = 1.0;
  s.box = BoxConstraints::symmetric(vec6(60, 40, 0, 200, 200, 250));
  // Dimension 3 has zero width; its increment only needs to be positive.
  s.grid_increments = vec6(7.5, 5, 1, 20, 20, 25);
  return s;
}

StagePlan PipelineConfig::pelvis_pso_stage() const {
  StagePlan s;
  s.name = "pelvis_pso";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::pso;
  s.downsample = ds_coarse;
  s.lambda = 1.0;
  s.box = BoxConstraints::symmetric(vec6(7.5, 10, 10, 20, 20, 25));
  s.pso = pso;
  return s;
}

StagePlan PipelineConfig::pelvis_bobyqa_stage_attempt2(bool coarse) const {
  StagePlan s;
  s.name = coarse ? "pelvis_bobyqa_a2_mid" : "pelvis_bobyqa_a2_fine";
  s.target = StageTarget::pelvis;
  s.optimizer = StageOptimizer::bobyqa;
  s.downsample = coarse ? ds_mid : ds_fine;
  s.lambda = 1.0;
  s.box = coarse ? BoxConstraints::symmetric(vec6(5, 5, 5, 10, 10, 20))
                 : BoxConstraints::symmetric(vec6(2.5, 2.5, 2.5, 5, 5, 10));
  s.bobyqa = bobyqa_pelvis;
  return s;
}

StagePlan PipelineConfig::femur_stage(StageTarget which,
                                      const std::set<std::uint8_t>& weight_classes) const {
  StagePlan s;
  s.name = which == StageTarget::femur_l_rot ? "femur_l_cmaes" : "femur_r_cmaes";
  s.target = which;
  s.optimizer = StageOptimizer::cmaes;
  s.downsample = ds_mid;
  s.regularizer = StageRegularizer::folded_rot;
  s.lambda = reg.lambda;
  s.cmaes = cmaes_femur;
  s.cmaes_sigma = VecX(3);
  s.cmaes_sigma << 30, 25, 15;
  s.use_patch_weights = !weight_classes.empty();
  s.weight_classes = weight_classes;
  return s;
}

StagePlan PipelineConfig::all_bodies_stage() const {
  StagePlan s;
  s.name = "all_bodies_bobyqa";
  s.target = StageTarget::all_bodies;
  s.optimizer = StageOptimizer::bobyqa;
  s.downsample = ds_fine;
  s.lambda = 1.0;
  VecX half(18);
  for (int k = 0; k < 3; ++k) half.segment(6 * k, 6) << 2.5, 2.5, 2.5, 2.5, 2.5, 2.5;
  s.box = BoxConstraints::symmetric(half);
  s.bobyqa = bobyqa_all;
  return s;
}

// --- pipeline execution ------------------------------------------------------

namespace {

StageResult run_stage(const StagePlan& stage, const Scene& scene, const Image2D& image,
                      const ProjectionGeometry& g, MultiBodyPose* pose,
                      const AppFrame& app, const PipelineConfig& config,
                      std::uint64_t seed, const LandmarkMap2* detections,
                      const LabelImage2D* weight_labels, ThreadPool* pool) {
  const auto t0 = std::chrono::steady_clock::now();
  StageObjective obj(scene, image, g, stage, *pose, app, config.reg,
                     config.render_step_mm, detections, weight_labels);
  ObjectiveFn f = [&obj](const VecX& v) { return obj(v); };

  OptimizerReport rep;
  switch (stage.optimizer) {
    case StageOptimizer::grid:
      rep = minimize_grid(f, stage.box, stage.grid_increments, pool);
      break;
    case StageOptimizer::de:
      rep = minimize_de(f, stage.box, stage.de, seed, pool);
      break;
    case StageOptimizer::pso:
      rep = minimize_pso(f, stage.box, stage.pso, seed, pool);
      break;
    case StageOptimizer::cmaes:
      rep = minimize_cmaes(f, VecX::Zero(obj.dim()), stage.cmaes_sigma, stage.cmaes,
                           nullptr, seed, pool);
      break;
    case StageOptimizer::bobyqa:
      rep = minimize_bobyqa(f, VecX::Zero(obj.dim()), stage.box, stage.bobyqa, pool);
      break;
  }

  StageResult out;
  out.name = stage.name;
  // Keep the stage only when it improved on its own starting point.
  const double at_ref = f(VecX::Zero(obj.dim()));
  if (rep.best_value <= at_ref) {
    *pose = obj.pose_at(rep.best_point);
  } else {
    rep.best_point = VecX::Zero(obj.dim());
    rep.best_value = at_ref;
  }
  out.report = std::move(rep);
  out.pose_after = *pose;
  out.seconds = elapsed_s(t0);
  return out;
}

double similarity_of(const Scene& scene, const Image2D& image, const ProjectionGeometry& g,
                     int factor, const MultiBodyPose& pose, const PipelineConfig& config) {
  StagePlan probe;
  probe.name = "similarity_probe";
  probe.target = StageTarget::all_bodies;
  probe.downsample = factor;
  probe.lambda = 1.0;
  StageObjective obj(scene, image, g, probe, pose, AppFrame{}, config.reg,
                     config.render_step_mm);
  return obj.similarity_at(VecX::Zero(18));
}

bool pelvis_success(const MultiBodyPose& pose, const MultiBodyPose* gt,
                    const Scene& scene, double rot_tol_deg, double final_similarity,
                    double sim_threshold) {
  if (gt) {
    const LandmarkMap3 lms = scene.all_landmarks();
    const Vec3 fh_mid = 0.5 * (lms.at("FH_l") + lms.at("FH_r"));
    const Mat3 frame = gt->pelvis.rotation.transpose();
    const Mat3 rel = frame.transpose() * (gt->pelvis.inverse() * pose.pelvis).rotation * frame;
    const double rot_deg = rad2deg(so3_log_matrix(rel).norm());
    return rot_deg < rot_tol_deg;
  }
  return final_similarity < sim_threshold;
}

}  // namespace

RegistrationReport run_offline_gt_pipeline(const Scene& scene, const Image2D& image,
                                           const ProjectionGeometry& g,
                                           const PipelineConfig& config,
                                           std::uint64_t seed, const MultiBodyPose* gt,
                                           ThreadPool* pool) {
  const auto t0 = std::chrono::steady_clock::now();
  const LandmarkMap3 lms = scene.all_landmarks();
  const AppFrame app = compute_app_frame(lms);
  const RigidPose init = init_ap_centroid(lms, app, g, config.init_depth_ratio);

  RegistrationReport rep;
  MultiBodyPose pose = MultiBodyPose::uniform(init);
  std::uint64_t stage_idx = 0;
  auto next_seed = [&] { return mix_seed(seed, stage_idx++); };
  auto exec = [&](const StagePlan& s) {
    rep.stages.push_back(run_stage(s, scene, image, g, &pose, app, config, next_seed(),
                                   nullptr, nullptr, pool));
  };

  // Attempt 1: DE with the plausibility prior, grid, CMA-ES with the Euler
  // prior, BOBYQA polish.
  exec(config.pelvis_de_stage());
  exec(config.pelvis_grid_stage_attempt1());
  exec(config.pelvis_cmaes_stage(StageRegularizer::euler_prior, {}));
  exec(config.pelvis_bobyqa_stage_attempt1());

  double sim = similarity_of(scene, image, g, config.ds_fine, pose, config);
  bool ok = pelvis_success(pose, gt, scene, config.success_rot_deg, sim,
                           config.success_similarity);

  if (!ok) {
    // Attempt 2 restarts from the AP initialization, unregularized.
    rep.attempt2_used = true;
    pose = MultiBodyPose::uniform(init);
    exec(config.pelvis_grid_stage_attempt2());
    exec(config.pelvis_pso_stage());
    exec(config.pelvis_bobyqa_stage_attempt2(true));
    exec(config.pelvis_bobyqa_stage_attempt2(false));
    sim = similarity_of(scene, image, g, config.ds_fine, pose, config);
    ok = pelvis_success(pose, gt, scene, config.success_rot_deg, sim,
                        config.success_similarity);
  }

  if (ok) {
    exec(config.femur_stage(StageTarget::femur_l_rot, {}));
    exec(config.femur_stage(StageTarget::femur_r_rot, {}));
    exec(config.all_bodies_stage());
    sim = similarity_of(scene, image, g, config.ds_fine, pose, config);
  }

  rep.final_pose = pose;
  rep.success = ok;
  rep.final_similarity = sim;
  rep.wall_seconds = elapsed_s(t0);
  return rep;
}

RegistrationReport run_intraop(int method, const Scene& scene, const Image2D& image,
                               const ProjectionGeometry& g,
                               const AnnotationSet& annotations,
                               const PipelineConfig& config, std::uint64_t seed,
                               const MultiBodyPose* gt, ThreadPool* pool) {
  if (method < 1 || method > 3) {
    throw std::invalid_argument("run_intraop: method must be 1, 2, or 3");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const LandmarkMap3 lms = scene.all_landmarks();
  const AppFrame app = compute_app_frame(lms);

  LandmarkMap2 detections;
  if (method >= 2) {
    detections = detections_to_landmarks(
        extract_landmarks(annotations.heatmaps, annotations.labels));
  }

  RigidPose init;
  if (method == 1) {
    init = init_ap_centroid(lms, app, g, config.init_depth_ratio);
  } else if (method == 2) {
    std::vector<PnpCorrespondence> corr;
    for (const auto& [name, det] : detections) {
      if (!det.visible) continue;
      auto it = lms.find(name);
      if (it == lms.end()) continue;
      corr.push_back({it->second, det.pixel});
    }
    if (corr.size() >= 4) {
      init = solve_pnp(corr, g, init_ap_centroid(lms, app, g, config.init_depth_ratio));
    } else {
      std::fprintf(stderr,
                   "run_intraop: method 2 has %zu detections (< 4); "
                   "falling back to single-landmark initialization\n",
                   corr.size());
      init = init_ap_single_landmark(lms, detections, app, g, config.init_depth_ratio);
    }
  } else {
    init = init_ap_single_landmark(lms, detections, app, g, config.init_depth_ratio);
  }

  const std::set<std::uint8_t> hemipelves = {
      std::uint8_t(AnatomyClass::hemipelvis_l), std::uint8_t(AnatomyClass::hemipelvis_r)};
  const std::set<std::uint8_t> hemis_and_femurs = {
      std::uint8_t(AnatomyClass::hemipelvis_l), std::uint8_t(AnatomyClass::hemipelvis_r),
      std::uint8_t(AnatomyClass::femur_l), std::uint8_t(AnatomyClass::femur_r)};
  const bool weighted = method >= 2;

  RegistrationReport rep;
  MultiBodyPose pose = MultiBodyPose::uniform(init);
  std::uint64_t stage_idx = 0;
  auto next_seed = [&] { return mix_seed(seed, stage_idx++); };
  auto exec = [&](const StagePlan& s) {
    rep.stages.push_back(run_stage(s, scene, image, g, &pose, app, config, next_seed(),
                                   method >= 2 ? &detections : nullptr,
                                   weighted ? &annotations.labels : nullptr, pool));
  };

  StageRegularizer pelvis_reg = StageRegularizer::none;
  if (method == 2) pelvis_reg = StageRegularizer::euler_prior;
  if (method == 3) pelvis_reg = StageRegularizer::reprojection;

  exec(config.pelvis_cmaes_stage(pelvis_reg, weighted ? hemipelves : std::set<std::uint8_t>{}));
  exec(config.pelvis_bobyqa_stage_attempt1());  // finer scale, no weights, no prior
  exec(config.femur_stage(StageTarget::femur_l_rot,
                          weighted ? hemis_and_femurs : std::set<std::uint8_t>{}));
  exec(config.femur_stage(StageTarget::femur_r_rot,
                          weighted ? hemis_and_femurs : std::set<std::uint8_t>{}));
  exec(config.all_bodies_stage());

  const double sim = similarity_of(scene, image, g, config.ds_fine, pose, config);
  rep.final_pose = pose;
  rep.final_similarity = sim;
  rep.success = pelvis_success(pose, gt, scene, config.success_rot_deg, sim,
                               config.success_similarity);
  rep.wall_seconds = elapsed_s(t0);
  return rep;
}

// --- JSON --------------------------------------------------------------------

std::string PipelineConfig::to_json() const {
  json j;
  j["lambda"] = reg.lambda;
  j["sigma_l_mm"] = reg.sigma_l_mm;
  j["euler_sigmas"] = {reg.euler_sigmas[0], reg.euler_sigmas[1], reg.euler_sigmas[2],
                       reg.euler_sigmas[3], reg.euler_sigmas[4], reg.euler_sigmas[5]};
  j["folded_mu_deg"] = reg.folded_mu_deg;
  j["folded_sigma_deg"] = reg.folded_sigma_deg;
  j["render_step_mm"] = render_step_mm;
  j["init_depth_ratio"] = init_depth_ratio;
  j["downsample"] = {ds_coarse, ds_mid, ds_fine};
  j["de"] = {{"iters", de.iters}, {"pop", de.pop}, {"cr", de.cr},
             {"dither", {de.dither_lo, de.dither_hi}}};
  j["pso"] = {{"iters", pso.iters}, {"particles", pso.particles}, {"omega", pso.omega},
              {"phi_p", pso.phi_p}, {"phi_g", pso.phi_g}};
  j["cmaes_pelvis"] = {{"pop", cmaes_pelvis.pop}, {"max_iters", cmaes_pelvis.max_iters}};
  j["cmaes_femur"] = {{"pop", cmaes_femur.pop}, {"max_iters", cmaes_femur.max_iters}};
  j["bobyqa_pelvis"] = {{"initial_radius_frac", bobyqa_pelvis.initial_radius_frac},
                        {"final_radius", bobyqa_pelvis.final_radius},
                        {"max_evals", bobyqa_pelvis.max_evals}};
  j["bobyqa_all"] = {{"initial_radius_frac", bobyqa_all.initial_radius_frac},
                     {"final_radius", bobyqa_all.final_radius},
                     {"max_evals", bobyqa_all.max_evals}};
  j["success_rot_deg"] = success_rot_deg;
  j["success_similarity"] = success_similarity;
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  PipelineConfig c;
  const json j = json::parse(text);
  c.reg.lambda = j.value("lambda", c.reg.lambda);
  c.reg.sigma_l_mm = j.value("sigma_l_mm", c.reg.sigma_l_mm);
  if (j.contains("euler_sigmas")) {
    const auto& e = j.at("euler_sigmas");
    if (e.size() != 6) throw std::invalid_argument("config: euler_sigmas needs 6 entries");
    for (int i = 0; i < 6; ++i) c.reg.euler_sigmas[i] = e[i].get<double>();
  }
  c.reg.folded_mu_deg = j.value("folded_mu_deg", c.reg.folded_mu_deg);
  c.reg.folded_sigma_deg = j.value("folded_sigma_deg", c.reg.folded_sigma_deg);
  c.render_step_mm = j.value("render_step_mm", c.render_step_mm);
  c.init_depth_ratio = j.value("init_depth_ratio", c.init_depth_ratio);
  if (j.contains("downsample")) {
    const auto& d = j.at("downsample");
    if (d.size() != 3) throw std::invalid_argument("config: downsample needs 3 entries");
    c.ds_coarse = d[0].get<int>();
    c.ds_mid = d[1].get<int>();
    c.ds_fine = d[2].get<int>();
  }
  if (j.contains("de")) {
    const auto& d = j.at("de");
    c.de.iters = d.value("iters", c.de.iters);
    c.de.pop = d.value("pop", c.de.pop);
    c.de.cr = d.value("cr", c.de.cr);
    if (d.contains("dither")) {
      c.de.dither_lo = d.at("dither")[0].get<double>();
      c.de.dither_hi = d.at("dither")[1].get<double>();
    }
  }
  if (j.contains("pso")) {
    const auto& p = j.at("pso");
    c.pso.iters = p.value("iters", c.pso.iters);
    c.pso.particles = p.value("particles", c.pso.particles);
    c.pso.omega = p.value("omega", c.pso.omega);
    c.pso.phi_p = p.value("phi_p", c.pso.phi_p);
    c.pso.phi_g = p.value("phi_g", c.pso.phi_g);
  }
  if (j.contains("cmaes_pelvis")) {
    c.cmaes_pelvis.pop = j.at("cmaes_pelvis").value("pop", c.cmaes_pelvis.pop);
    c.cmaes_pelvis.max_iters = j.at("cmaes_pelvis").value("max_iters", c.cmaes_pelvis.max_iters);
  }
  if (j.contains("cmaes_femur")) {
    c.cmaes_femur.pop = j.at("cmaes_femur").value("pop", c.cmaes_femur.pop);
    c.cmaes_femur.max_iters = j.at("cmaes_femur").value("max_iters", c.cmaes_femur.max_iters);
  }
  auto load_bobyqa = [&](const char* key, BobyqaParams* b) {
    if (!j.contains(key)) return;
    const auto& q = j.at(key);
    b->initial_radius_frac = q.value("initial_radius_frac", b->initial_radius_frac);
    b->final_radius = q.value("final_radius", b->final_radius);
    b->max_evals = q.value("max_evals", b->max_evals);
  };
  load_bobyqa("bobyqa_pelvis", &c.bobyqa_pelvis);
  load_bobyqa("bobyqa_all", &c.bobyqa_all);
  c.success_rot_deg = j.value("success_rot_deg", c.success_rot_deg);
  c.success_similarity = j.value("success_similarity", c.success_similarity);
  return c;
}

std::string RegistrationReport::to_json() const {
  json j;
  j["success"] = success;
  j["attempt2_used"] = attempt2_used;
  j["final_similarity"] = final_similarity;
  j["wall_seconds"] = wall_seconds;
  j["pose"] = {{"pelvis", json::parse(pose_to_json(final_pose.pelvis))},
               {"femur_l", json::parse(pose_to_json(final_pose.femur_l))},
               {"femur_r", json::parse(pose_to_json(final_pose.femur_r))}};
  json stages_j = json::array();
  for (const auto& s : stages) {
    stages_j.push_back({{"name", s.name},
                        {"best_value", s.report.best_value},
                        {"evaluations", s.report.eval_count},
                        {"seconds", s.seconds}});
  }
  j["stages"] = stages_j;
  return j.dump(2);
}

}  // namespace fregi
