// Command-line front end: phantom generation, DRR rendering, annotation
// generation and augmentation, registration pipelines, and evaluation.

#include "fregi/annotate.hpp"
#include "fregi/eval.hpp"
#include "fregi/phantom.hpp"
#include "fregi/registration.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

struct CommonArgs {
  int threads = 0;  // 0 resolves via FLUOROREGI_THREADS / hardware
  std::uint64_t seed = 0;
};

fregi::PipelineConfig load_config(const std::string& config_path) {
  if (config_path.empty()) return {};
  return fregi::PipelineConfig::from_json(slurp(config_path));
}

json pose_error_json(const fregi::PoseError& e) {
  return {{"rotation_deg", e.rotation_deg},
          {"rotation_xyz_deg", {e.rotation_xyz_deg.x(), e.rotation_xyz_deg.y(),
                                 e.rotation_xyz_deg.z()}},
          {"translation_mm", e.translation_mm},
          {"translation_xyz_mm", {e.translation_xyz_mm.x(), e.translation_xyz_mm.y(),
                                   e.translation_xyz_mm.z()}}};
}

json full_pose_error_json(const fregi::Scene& scene, const fregi::MultiBodyPose& est,
                          const fregi::MultiBodyPose& gt) {
  const fregi::LandmarkMap3 lms = scene.all_landmarks();
  const fregi::AppFrame app = fregi::compute_app_frame(lms);
  const fregi::Vec3 fh_l = lms.at("FH_l");
  const fregi::Vec3 fh_r = lms.at("FH_r");
  json j;
  j["pelvis"] =
      pose_error_json(fregi::pelvis_pose_error(est.pelvis, gt.pelvis, 0.5 * (fh_l + fh_r)));
  j["femur_l"] = pose_error_json(fregi::femur_pose_error(
      est.pelvis.inverse() * est.femur_l, gt.pelvis.inverse() * gt.femur_l, app, fh_l));
  j["femur_r"] = pose_error_json(fregi::femur_pose_error(
      est.pelvis.inverse() * est.femur_r, gt.pelvis.inverse() * gt.femur_r, app, fh_r));
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hip fluoroscopy annotation and 2D/3D registration toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--threads", common.threads,
                 "worker threads (0 = FLUOROREGI_THREADS or hardware)");
  app.add_option("--seed", common.seed, "master random seed");

  // phantom
  auto* sc_phantom = app.add_subcommand("phantom", "generate the procedural hip scene");
  std::string phantom_out;
  fregi::PhantomSpec pspec;
  sc_phantom->add_option("--out", phantom_out, "output scene directory")->required();
  sc_phantom->add_option("--dim", pspec.dim, "voxels per axis");
  sc_phantom->add_option("--spacing", pspec.spacing_mm, "voxel size, mm");

  // shared render/annotate inputs
  struct ViewArgs {
    std::string scene_dir, geometry_path, pose_path;
    double step_mm = 1.0;
  };

  auto add_view_options = [](CLI::App* sc, ViewArgs* v, bool pose_required) {
    sc->add_option("--scene", v->scene_dir, "scene directory")->required();
    sc->add_option("--geometry", v->geometry_path, "projection geometry JSON")->required();
    auto* po = sc->add_option("--pose", v->pose_path, "multi-body pose JSON");
    if (pose_required) po->required();
    sc->add_option("--step", v->step_mm, "ray sampling step, mm");
  };

  // render
  auto* sc_render = app.add_subcommand("render", "render a DRR and its projections");
  ViewArgs render_args;
  std::string render_out;
  bool render_labels = false, render_landmarks = false;
  add_view_options(sc_render, &render_args, true);
  sc_render->add_option("--out", render_out, "output directory")->required();
  sc_render->add_flag("--labels", render_labels, "also project the label map");
  sc_render->add_flag("--landmarks", render_landmarks, "also project the 2D landmarks");

  // annotate
  auto* sc_annotate = app.add_subcommand("annotate",
                                         "render an image plus full annotations");
  ViewArgs ann_args;
  std::string ann_out;
  double ann_sigma = 2.5;
  add_view_options(sc_annotate, &ann_args, true);
  sc_annotate->add_option("--out", ann_out, "output bundle directory")->required();
  sc_annotate->add_option("--sigma", ann_sigma, "heatmap sigma, px");

  // augment
  auto* sc_augment = app.add_subcommand("augment", "augment an annotation bundle");
  std::string aug_in, aug_out;
  fregi::AugmentParams aug_params;
  sc_augment->add_option("--in", aug_in, "input bundle directory")->required();
  sc_augment->add_option("--out", aug_out, "output bundle directory")->required();
  sc_augment->add_option("--invert-prob", aug_params.invert_prob, "inversion probability");
  sc_augment->add_option("--corrupt-prob", aug_params.corrupt_prob,
                         "local corruption probability");
  sc_augment->add_option("--translate-max", aug_params.translate_px_max,
                         "max warp translation, px");

  // gt-pipeline
  auto* sc_gt = app.add_subcommand("gt-pipeline",
                                   "offline ground-truth registration pipeline");
  std::string gt_scene, gt_bundle, gt_config, gt_report_out, gt_gt_pose, gt_ann_out;
  sc_gt->add_option("--scene", gt_scene, "scene directory")->required();
  sc_gt->add_option("--bundle", gt_bundle, "annotation bundle with the target image")
      ->required();
  sc_gt->add_option("--config", gt_config, "pipeline config JSON");
  sc_gt->add_option("--out", gt_report_out, "report JSON path")->required();
  sc_gt->add_option("--gt", gt_gt_pose, "ground-truth pose JSON for the success check");
  sc_gt->add_option("--annotate-out", gt_ann_out,
                    "write annotations at the recovered pose to this bundle directory");

  // register
  auto* sc_reg = app.add_subcommand("register", "intraoperative registration");
  int reg_method = 3;
  std::string reg_scene, reg_bundle, reg_config, reg_report_out, reg_gt_pose;
  sc_reg->add_option("--method", reg_method, "1 naive, 2 PnP+Euler prior, 3 reprojection")
      ->check(CLI::Range(1, 3));
  sc_reg->add_option("--scene", reg_scene, "scene directory")->required();
  sc_reg->add_option("--bundle", reg_bundle, "annotation bundle directory")->required();
  sc_reg->add_option("--config", reg_config, "pipeline config JSON");
  sc_reg->add_option("--out", reg_report_out, "report JSON path")->required();
  sc_reg->add_option("--gt", reg_gt_pose, "ground-truth pose JSON for the success check");

  // config
  auto* sc_config = app.add_subcommand("config", "print the default pipeline config");
  std::string config_out;
  sc_config->add_option("--out", config_out, "write to file instead of stdout");

  // eval
  auto* sc_eval = app.add_subcommand("eval", "evaluation utilities");
  sc_eval->require_subcommand(1);
  auto* sc_eval_pose = sc_eval->add_subcommand("pose", "pose error against ground truth");
  std::string ev_scene, ev_est, ev_gt;
  sc_eval_pose->add_option("--scene", ev_scene, "scene directory")->required();
  sc_eval_pose->add_option("--est", ev_est, "estimated multi-body pose JSON")->required();
  sc_eval_pose->add_option("--gt", ev_gt, "ground-truth multi-body pose JSON")->required();
  auto* sc_eval_dice = sc_eval->add_subcommand("dice", "label-map dice overlap");
  std::string dice_est, dice_gt;
  sc_eval_dice->add_option("--est", dice_est, "estimated labels (.json header)")->required();
  sc_eval_dice->add_option("--gt", dice_gt, "ground-truth labels (.json header)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    std::unique_ptr<fregi::ThreadPool> pool;
    if (common.threads != 1) pool = std::make_unique<fregi::ThreadPool>(common.threads);
    fregi::ThreadPool* pool_ptr = pool && pool->thread_count() > 1 ? pool.get() : nullptr;

    if (*sc_phantom) {
      pspec.seed = common.seed ? common.seed : pspec.seed;
      fregi::write_scene(phantom_out, fregi::build_phantom(pspec));
      std::cout << "scene written to " << phantom_out << "\n";
    } else if (*sc_render) {
      const fregi::Scene scene = fregi::read_scene(render_args.scene_dir);
      const auto g = fregi::ProjectionGeometry::from_json(slurp(render_args.geometry_path));
      const auto pose = fregi::multibody_pose_from_json(slurp(render_args.pose_path));
      std::filesystem::create_directories(render_out);
      const fregi::Image2D img =
          fregi::render_drr(scene.objects, g, pose, render_args.step_mm);
      fregi::write_image(std::filesystem::path(render_out) / "image.json", img);
      if (render_labels) {
        fregi::write_image(std::filesystem::path(render_out) / "labels.json",
                           fregi::project_labels(scene.objects, g, pose,
                                                 render_args.step_mm));
      }
      if (render_landmarks) {
        const auto lms = fregi::project_landmarks(scene.objects, g, pose);
        json j = json::object();
        for (const auto& [name, lm] : lms) {
          j[name] = {{"pixel", {lm.pixel.x(), lm.pixel.y()}}, {"visible", lm.visible}};
        }
        spit((std::filesystem::path(render_out) / "landmarks.json").string(), j.dump(2));
      }
      std::cout << "render written to " << render_out << "\n";
    } else if (*sc_annotate) {
      const fregi::Scene scene = fregi::read_scene(ann_args.scene_dir);
      const auto g = fregi::ProjectionGeometry::from_json(slurp(ann_args.geometry_path));
      const auto pose = fregi::multibody_pose_from_json(slurp(ann_args.pose_path));
      const fregi::Image2D img = fregi::render_drr(scene.objects, g, pose, ann_args.step_mm);
      fregi::AnnotationSet ann = fregi::generate_annotations(scene, g, pose, ann_sigma);
      ann.seed = common.seed;
      fregi::write_annotation_bundle(ann_out, img, ann);
      std::cout << "annotations written to " << ann_out << "\n";
    } else if (*sc_augment) {
      auto [img, ann] = fregi::read_annotation_bundle(aug_in);
      auto [aug_img, aug_ann] = fregi::augment(img, ann, aug_params, common.seed);
      fregi::write_annotation_bundle(aug_out, aug_img, aug_ann);
      std::cout << "augmented bundle written to " << aug_out << "\n";
    } else if (*sc_gt) {
      const fregi::Scene scene = fregi::read_scene(gt_scene);
      auto [img, ann] = fregi::read_annotation_bundle(gt_bundle);
      const fregi::PipelineConfig config = load_config(gt_config);
      std::optional<fregi::MultiBodyPose> gt;
      if (!gt_gt_pose.empty()) gt = fregi::multibody_pose_from_json(slurp(gt_gt_pose));
      const fregi::RegistrationReport report = fregi::run_offline_gt_pipeline(
          scene, img, ann.geometry, config, common.seed, gt ? &*gt : nullptr, pool_ptr);
      spit(gt_report_out, report.to_json());
      if (!gt_ann_out.empty()) {
        fregi::write_annotation_bundle(
            gt_ann_out, img,
            fregi::generate_annotations(scene, ann.geometry, report.final_pose));
      }
      std::cout << (report.success ? "registration succeeded" : "registration FAILED")
                << ", report at " << gt_report_out << "\n";
    } else if (*sc_reg) {
      const fregi::Scene scene = fregi::read_scene(reg_scene);
      auto [img, ann] = fregi::read_annotation_bundle(reg_bundle);
      const fregi::PipelineConfig config = load_config(reg_config);
      std::optional<fregi::MultiBodyPose> gt;
      if (!reg_gt_pose.empty()) gt = fregi::multibody_pose_from_json(slurp(reg_gt_pose));
      const fregi::RegistrationReport report =
          fregi::run_intraop(reg_method, scene, img, ann.geometry, ann, config,
                             common.seed, gt ? &*gt : nullptr, pool_ptr);
      spit(reg_report_out, report.to_json());
      std::cout << (report.success ? "registration succeeded" : "registration FAILED")
                << ", report at " << reg_report_out << "\n";
    } else if (*sc_config) {
      const std::string text = fregi::PipelineConfig{}.to_json();
      if (config_out.empty()) {
        std::cout << text << "\n";
      } else {
        spit(config_out, text);
      }
    } else if (*sc_eval) {
      if (*sc_eval_pose) {
        const fregi::Scene scene = fregi::read_scene(ev_scene);
        const auto est = fregi::multibody_pose_from_json(slurp(ev_est));
        const auto gt = fregi::multibody_pose_from_json(slurp(ev_gt));
        std::cout << full_pose_error_json(scene, est, gt).dump(2) << "\n";
      } else if (*sc_eval_dice) {
        const fregi::LabelImage2D est = fregi::read_image_u8(dice_est);
        const fregi::LabelImage2D gt = fregi::read_image_u8(dice_gt);
        const fregi::DiceResult d = fregi::dice_score(est, gt);
        json j;
        j["mean"] = d.mean;
        for (int c = 0; c < fregi::kNumClasses; ++c) {
          j["per_class"].push_back(d.per_class[c]);
          j["vacuous"].push_back(d.vacuous[c]);
        }
        std::cout << j.dump(2) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
