#include "fregi/projector.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>

namespace fregi {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

json pose_j(const RigidPose& p) { return json::parse(pose_to_json(p)); }

}  // namespace

std::string multibody_pose_to_json(const MultiBodyPose& p) {
  json j;
  j["pelvis"] = pose_j(p.pelvis);
  j["femur_l"] = pose_j(p.femur_l);
  j["femur_r"] = pose_j(p.femur_r);
  return j.dump(2);
}

MultiBodyPose multibody_pose_from_json(const std::string& text) {
  const json j = json::parse(text);
  MultiBodyPose p;
  p.pelvis = pose_from_json(j.at("pelvis").dump());
  p.femur_l = pose_from_json(j.at("femur_l").dump());
  p.femur_r = pose_from_json(j.at("femur_r").dump());
  return p;
}

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
  std::filesystem::create_directories(dir);
  json objects = json::array();
  for (const auto& o : scene.objects) {
    write_volume(dir / (o.name + "_intensity.json"), o.intensity_volume);
    write_volume(dir / (o.name + "_labels.json"), o.label_volume);
    json lms = json::object();
    for (const auto& [name, p] : o.landmarks3d) lms[name] = {p.x(), p.y(), p.z()};
    objects.push_back({{"name", o.name},
                       {"intensity", o.name + "_intensity.json"},
                       {"labels", o.name + "_labels.json"},
                       {"landmarks", lms}});
  }
  write_text(dir / "scene.json", json{{"objects", objects}}.dump(2));
}

Scene read_scene(const std::filesystem::path& dir) {
  const json j = json::parse(read_text(dir / "scene.json"));
  Scene scene;
  for (const auto& jo : j.at("objects")) {
    ObjectModel o;
    o.name = jo.at("name").get<std::string>();
    o.intensity_volume = read_volume_f32(dir / jo.at("intensity").get<std::string>());
    o.label_volume = read_volume_u8(dir / jo.at("labels").get<std::string>());
    for (const auto& [name, pj] : jo.at("landmarks").items()) {
      if (pj.size() != 3) throw std::runtime_error("scene.json: landmark needs 3 coords");
      o.landmarks3d[name] = Vec3(pj[0].get<double>(), pj[1].get<double>(), pj[2].get<double>());
    }
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

}  // namespace fregi
