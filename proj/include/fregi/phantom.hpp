#pragma once

#include "fregi/projector.hpp"

#include <cstdint>

namespace fregi {

// Procedural hip phantom: two iliac-wing shells joined by pubic/ischial bars
// that enclose obturator openings, acetabular cups, two femurs with neck,
// shaft, and trochanter bumps, plus midline vertebral bodies and a sacral
// block.  Anatomy coordinates are millimetres with x to the patient's left,
// y superior, z anterior, origin at the volume center.
struct PhantomSpec {
  int dim = 64;             // voxels per axis
  double spacing_mm = 3.0;  // isotropic voxel size
  std::uint64_t seed = 2024;
  double bone_mu = 0.05;    // base attenuation, mm^-1
  double texture_amp = 0.35;
};

// Builds the three-object scene ("pelvis", "femur_l", "femur_r") with per-voxel
// class labels and all 14 landmarks.
Scene build_phantom(const PhantomSpec& spec = {});

}  // namespace fregi
