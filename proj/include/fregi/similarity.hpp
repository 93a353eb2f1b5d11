#pragma once

#include "fregi/imaging.hpp"

#include <set>

namespace fregi {

struct PatchParams {
  int patch_radius = 5;  // 11x11 patches
  int stride = 1;
};

// One weight per patch center on the stride grid; centers at pixel
// (i*stride, j*stride) for all in-image i, j.
struct PatchWeights {
  int rows = 0, cols = 0;  // grid dims, not image dims
  std::vector<double> w;

  double& at(int i, int j) { return w[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * cols + j]; }
};

inline int patch_grid_len(int image_len, int stride) {
  return (image_len + stride - 1) / stride;
}

PatchWeights uniform_patch_weights(int image_rows, int image_cols,
                                   const PatchParams& p = {});

// Weight 1 for patches whose center pixel carries one of the included labels,
// 0 elsewhere.
PatchWeights patch_weights_from_labels(const LabelImage2D& lbl,
                                       const std::set<std::uint8_t>& included,
                                       const PatchParams& p = {});

// Whole-image normalized cross-correlation, sum((A-muA)(B-muB)) / (P sigA sigB).
// Zero-variance input yields 0 and sets *degenerate when provided.
double ncc(const Image2D& a, const Image2D& b, bool* degenerate = nullptr);

// Patch-wise gradient NCC similarity: Sobel gradients of both images, NCC of
// the x- and y-gradient patches averaged per patch, weighted mean over the
// patch grid, then negated so that lower is better (perfect match = -1).
// Patches are clipped at the image border.  Zero-variance patch channels
// contribute 0.  weights == nullptr means uniform.
double patch_grad_ncc(const Image2D& fixed, const Image2D& moving,
                      const PatchWeights* weights = nullptr,
                      const PatchParams& p = {});

}  // namespace fregi
