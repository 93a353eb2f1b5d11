#pragma once

#include "fregi/annotate.hpp"
#include "fregi/geometry.hpp"
#include "fregi/imaging.hpp"
#include "fregi/landmarks.hpp"
#include "fregi/optimize.hpp"
#include "fregi/projector.hpp"
#include "fregi/regularize.hpp"
#include "fregi/similarity.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fregi {

enum class StageTarget { pelvis, femur_l_rot, femur_r_rot, all_bodies };
enum class StageOptimizer { grid, de, pso, cmaes, bobyqa };
enum class StageRegularizer { none, de_plausibility, euler_prior, reprojection, folded_rot };

// One optimization stage: what moves, which optimizer, at what resolution,
// under which regularizer and patch weighting.
struct StagePlan {
  std::string name;
  StageTarget target = StageTarget::pelvis;
  StageOptimizer optimizer = StageOptimizer::cmaes;
  int downsample = 8;
  double lambda = 1.0;  // 0.9 whenever a regularizer is active
  StageRegularizer regularizer = StageRegularizer::none;
  bool use_patch_weights = false;
  std::set<std::uint8_t> weight_classes;

  BoxConstraints box;     // grid / de / pso / bobyqa, degrees and mm
  VecX grid_increments;
  DeParams de;
  PsoParams pso;
  CmaesParams cmaes;
  VecX cmaes_sigma;
  BobyqaParams bobyqa;
};

// Shipped defaults: resolutions, search regions, increments, and optimizer
// parameters for every stage of the pipelines.
struct PipelineConfig {
  RegWeights reg;                    // lambda, sigma_l, Euler sigmas, folded prior
  double render_step_mm = 1.0;
  double init_depth_ratio = 0.7;
  int ds_coarse = 32, ds_mid = 8, ds_fine = 4;

  DeParams de;                        // 400 iterations, population 1000
  PsoParams pso;                      // 50 iterations, 21000 particles
  CmaesParams cmaes_pelvis{100, 100, 1e-10, 1e-12};
  CmaesParams cmaes_femur{100, 60, 1e-10, 1e-12};
  BobyqaParams bobyqa_pelvis{0.25, 1e-4, 4000};
  BobyqaParams bobyqa_all{0.25, 1e-3, 4000};

  double success_rot_deg = 1.0;       // ground-truth success threshold
  double success_similarity = -0.6;   // blind success threshold on final similarity

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);

  // Stage factories with the published search regions baked in.
  StagePlan pelvis_de_stage() const;
  StagePlan pelvis_grid_stage_attempt1() const;
  StagePlan pelvis_cmaes_stage(StageRegularizer reg_kind,
                               const std::set<std::uint8_t>& weight_classes) const;
  StagePlan pelvis_bobyqa_stage_attempt1() const;
  StagePlan pelvis_grid_stage_attempt2() const;
  StagePlan pelvis_pso_stage() const;
  StagePlan pelvis_bobyqa_stage_attempt2(bool coarse) const;
  StagePlan femur_stage(StageTarget which, const std::set<std::uint8_t>& weight_classes) const;
  StagePlan all_bodies_stage() const;
};

// Femur-relative pose from a rotation vector (degrees) about the femoral head
// center, axes given by the anterior pelvic plane; zero relative translation.
RigidPose pose_from_femur_rotation(const Vec3& rot_deg, const Vec3& fh_center,
                                   const AppFrame& app);

// Callable stage objective: lambda * similarity + (1 - lambda) * regularizer
// over the stage's parameter vector.  Static objects are rendered once at
// construction; each evaluation renders only what the stage moves.
class StageObjective {
 public:
  StageObjective(const Scene& scene, const Image2D& image,
                 const ProjectionGeometry& g, const StagePlan& stage,
                 const MultiBodyPose& ref_pose, const AppFrame& app,
                 const RegWeights& reg, double render_step_mm,
                 const LandmarkMap2* detections = nullptr,
                 const LabelImage2D* weight_labels = nullptr);

  double operator()(const VecX& params) const;
  MultiBodyPose pose_at(const VecX& params) const;
  double similarity_at(const VecX& params) const;  // the lambda=1 part alone
  int dim() const { return dim_; }

 private:
  const Scene& scene_;
  const StagePlan& stage_;
  MultiBodyPose ref_;
  AppFrame app_;
  RegWeights reg_;
  double step_mm_;
  const LandmarkMap2* detections_;
  ProjectionGeometry stage_g_;
  Image2D fixed_;
  Image2D static_drr_;
  PatchWeights weights_;
  bool have_weights_ = false;
  Vec3 pelvis_center_w_{0.0, 0.0, 0.0};
  Vec3 fh_l_w_{0.0, 0.0, 0.0};
  Vec3 fh_r_w_{0.0, 0.0, 0.0};
  Mat3 app_axes_w_ = Mat3::Identity();
  int dim_ = 6;
  std::vector<std::string> moving_;
  LandmarkMap3 pelvis_lms_;
};

// Convenience single evaluation used by tests.
double objective_eval(const Scene& scene, const Image2D& image,
                      const ProjectionGeometry& g, const StagePlan& stage,
                      const MultiBodyPose& ref_pose, const AppFrame& app,
                      const RegWeights& reg, double render_step_mm, const VecX& params,
                      const LandmarkMap2* detections = nullptr,
                      const LabelImage2D* weight_labels = nullptr);

struct StageResult {
  std::string name;
  OptimizerReport report;
  MultiBodyPose pose_after;
  double seconds = 0.0;
};

struct RegistrationReport {
  MultiBodyPose final_pose;
  std::vector<StageResult> stages;
  bool success = false;
  bool attempt2_used = false;
  double final_similarity = 0.0;  // plain similarity at the final pose, finest scale
  double wall_seconds = 0.0;

  std::string to_json() const;
};

// Offline ground-truth annotation pipeline: pelvis attempt 1 (DE, grid,
// CMA-ES, BOBYQA), on failure attempt 2 (grid, PSO, BOBYQA x2, unregularized),
// then per-femur rotation stages and a simultaneous all-bodies refinement.
// gt, when supplied, drives the success check (pelvis rotation error about the
// femoral-head midpoint under success_rot_deg); otherwise the final
// similarity threshold decides.
RegistrationReport run_offline_gt_pipeline(const Scene& scene, const Image2D& image,
                                           const ProjectionGeometry& g,
                                           const PipelineConfig& config,
                                           std::uint64_t seed,
                                           const MultiBodyPose* gt = nullptr,
                                           ThreadPool* pool = nullptr);

// Intraoperative methods.  1: centroid AP init, uniform weights, no
// regularization.  2: PnP init from detections, hemipelvis weights, Euler
// prior.  3: single-landmark AP init, hemipelvis weights, reprojection prior.
// Methods 2 and 3 extract detections from the annotations; method 2 falls
// back to the method-3 initialization when fewer than 4 detections exist.
RegistrationReport run_intraop(int method, const Scene& scene, const Image2D& image,
                               const ProjectionGeometry& g,
                               const AnnotationSet& annotations,
                               const PipelineConfig& config, std::uint64_t seed,
                               const MultiBodyPose* gt = nullptr,
                               ThreadPool* pool = nullptr);

}  // namespace fregi
