#pragma once

#include "fregi/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fregi {

// Scalar voxel grid.  Voxel (x,y,z) holds the field value at physical point
// origin + (x*sx, y*sy, z*sz); storage is x-fastest.
template <typename T>
struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<T> voxels;

  VoxelGrid() = default;
  VoxelGrid(int nx_, int ny_, int nz_, const Vec3& spacing_, const Vec3& origin_, T fill = T{})
      : nx(nx_), ny(ny_), nz(nz_), spacing(spacing_), origin(origin_),
        voxels(static_cast<std::size_t>(nx_) * ny_ * nz_, fill) {}

  std::size_t size() const { return voxels.size(); }
  bool empty() const { return voxels.empty(); }

  T& at(int x, int y, int z)
  {
    return voxels[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z)];
  }
  T at(int x, int y, int z) const
  {
    return voxels[static_cast<std::size_t>(x) + static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z)];
  }

  // Physical extent spanned by voxel centers.
  Vec3 extent() const
  {
    return {(nx - 1) * spacing[0], (ny - 1) * spacing[1], (nz - 1) * spacing[2]};
  }
};

using Volume3D = VoxelGrid<float>;
using LabelVolume3D = VoxelGrid<std::uint8_t>;

// Trilinear sample at a physical point (mm); zero outside the grid.
double sample_trilinear(const Volume3D& v, const Vec3& p);

// Row-major scalar image; pixel (row, col), row 0 at the top.
struct Image2D {
  int rows = 0, cols = 0;
  Vec2 pixel_spacing{1.0, 1.0};  // (row, col) mm
  std::vector<float> pixels;

  Image2D() = default;
  Image2D(int rows_, int cols_, const Vec2& spacing = {1.0, 1.0}, float fill = 0.0f)
      : rows(rows_), cols(cols_), pixel_spacing(spacing),
        pixels(static_cast<std::size_t>(rows_) * cols_, fill) {}

  float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }
};

struct LabelImage2D {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> labels;

  LabelImage2D() = default;
  LabelImage2D(int rows_, int cols_, std::uint8_t fill = 0)
      : rows(rows_), cols(cols_), labels(static_cast<std::size_t>(rows_) * cols_, fill) {}

  std::uint8_t& at(int r, int c) { return labels[static_cast<std::size_t>(r) * cols + c]; }
  std::uint8_t at(int r, int c) const { return labels[static_cast<std::size_t>(r) * cols + c]; }
};

// Trilinear resampling for intensities; physical extent preserved within one
// voxel.  Throws std::invalid_argument for non-positive spacing or an empty
// input.
Volume3D resample_isotropic(const Volume3D& v, double spacing);
// Nearest-neighbor variant for label volumes.
LabelVolume3D resample_isotropic(const LabelVolume3D& v, double spacing);

// Border crop followed by log-correction -log(max(I/I_max, epsilon)), so
// attenuating structures come out bright.
Image2D preprocess_fluoro(const Image2D& img, int crop_px, double epsilon = 1e-6);

// Box-filter downsampling; edge blocks average over the valid pixels only, so
// output dims are ceil(dim/factor).
Image2D downsample(const Image2D& img, int factor);

// Label images downsample by picking the label at each block's center pixel.
LabelImage2D downsample_labels(const LabelImage2D& lbl, int factor);

struct GradientPair {
  Image2D gx;  // column direction
  Image2D gy;  // row direction
};

// 3x3 Sobel with replicate-padded borders.  Requires dims >= 3.
GradientPair sobel_gradients(const Image2D& img);

// --- raw + JSON header file formats -----------------------------------------
//
// A dataset object "name" is stored as name.json (header) next to name.raw
// (little-endian payload, x-fastest).  Dims in the header are [nx,ny,nz] for
// volumes and [rows,cols] for images.

void write_volume(const std::filesystem::path& json_path, const Volume3D& v);
void write_volume(const std::filesystem::path& json_path, const LabelVolume3D& v);
Volume3D read_volume_f32(const std::filesystem::path& json_path);
LabelVolume3D read_volume_u8(const std::filesystem::path& json_path);

void write_image(const std::filesystem::path& json_path, const Image2D& img);
void write_image(const std::filesystem::path& json_path, const LabelImage2D& img);
Image2D read_image_f32(const std::filesystem::path& json_path);
LabelImage2D read_image_u8(const std::filesystem::path& json_path);

}  // namespace fregi
