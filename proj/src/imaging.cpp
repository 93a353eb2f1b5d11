#include "fregi/imaging.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fregi {

using nlohmann::json;

double sample_trilinear(const Volume3D& v, const Vec3& p)
{
  const double fx = (p[0] - v.origin[0]) / v.spacing[0];
  const double fy = (p[1] - v.origin[1]) / v.spacing[1];
  const double fz = (p[2] - v.origin[2]) / v.spacing[2];

  if (fx < 0.0 || fy < 0.0 || fz < 0.0 ||
      fx > v.nx - 1 || fy > v.ny - 1 || fz > v.nz - 1) {
    return 0.0;
  }

  int x0 = static_cast<int>(fx);
  int y0 = static_cast<int>(fy);
  int z0 = static_cast<int>(fz);
  x0 = std::min(x0, v.nx - 2 >= 0 ? v.nx - 2 : 0);
  y0 = std::min(y0, v.ny - 2 >= 0 ? v.ny - 2 : 0);
  z0 = std::min(z0, v.nz - 2 >= 0 ? v.nz - 2 : 0);
  const int x1 = std::min(x0 + 1, v.nx - 1);
  const int y1 = std::min(y0 + 1, v.ny - 1);
  const int z1 = std::min(z0 + 1, v.nz - 1);

  const double dx = fx - x0;
  const double dy = fy - y0;
  const double dz = fz - z0;

  const double c000 = v.at(x0, y0, z0), c100 = v.at(x1, y0, z0);
  const double c010 = v.at(x0, y1, z0), c110 = v.at(x1, y1, z0);
  const double c001 = v.at(x0, y0, z1), c101 = v.at(x1, y0, z1);
  const double c011 = v.at(x0, y1, z1), c111 = v.at(x1, y1, z1);

  const double c00 = c000 + dx * (c100 - c000);
  const double c10 = c010 + dx * (c110 - c010);
  const double c01 = c001 + dx * (c101 - c001);
  const double c11 = c011 + dx * (c111 - c011);

  const double c0 = c00 + dy * (c10 - c00);
  const double c1 = c01 + dy * (c11 - c01);

  return c0 + dz * (c1 - c0);
}

namespace {

template <typename T, typename Sampler>
VoxelGrid<T> resample_iso_impl(const VoxelGrid<T>& v, double spacing, Sampler sampler)
{
  if (spacing <= 0.0) {
    throw std::invalid_argument("resample_isotropic: spacing must be > 0");
  }
  if (v.empty()) {
    throw std::invalid_argument("resample_isotropic: empty volume");
  }

  const Vec3 ext = v.extent();
  VoxelGrid<T> out;
  out.nx = static_cast<int>(std::floor(ext[0] / spacing + 1e-9)) + 1;
  out.ny = static_cast<int>(std::floor(ext[1] / spacing + 1e-9)) + 1;
  out.nz = static_cast<int>(std::floor(ext[2] / spacing + 1e-9)) + 1;
  out.spacing = Vec3(spacing, spacing, spacing);
  out.origin = v.origin;
  out.voxels.resize(static_cast<std::size_t>(out.nx) * out.ny * out.nz);

  for (int z = 0; z < out.nz; ++z) {
    for (int y = 0; y < out.ny; ++y) {
      for (int x = 0; x < out.nx; ++x) {
        const Vec3 p = out.origin + Vec3(x * spacing, y * spacing, z * spacing);
        out.at(x, y, z) = sampler(v, p);
      }
    }
  }
  return out;
}

template <typename T>
T sample_nearest(const VoxelGrid<T>& v, const Vec3& p)
{
  const auto idx = [](double f, int n) {
    const int i = static_cast<int>(std::lround(f));
    return std::clamp(i, 0, n - 1);
  };
  const double fx = (p[0] - v.origin[0]) / v.spacing[0];
  const double fy = (p[1] - v.origin[1]) / v.spacing[1];
  const double fz = (p[2] - v.origin[2]) / v.spacing[2];
  return v.at(idx(fx, v.nx), idx(fy, v.ny), idx(fz, v.nz));
}

}  // namespace

Volume3D resample_isotropic(const Volume3D& v, double spacing)
{
  return resample_iso_impl<float>(v, spacing, [](const Volume3D& vol, const Vec3& p) {
    return static_cast<float>(sample_trilinear(vol, p));
  });
}

LabelVolume3D resample_isotropic(const LabelVolume3D& v, double spacing)
{
  return resample_iso_impl<std::uint8_t>(v, spacing, sample_nearest<std::uint8_t>);
}

Image2D preprocess_fluoro(const Image2D& img, int crop_px, double epsilon)
{
  const int rows = img.rows - 2 * crop_px;
  const int cols = img.cols - 2 * crop_px;
  if (crop_px < 0 || rows <= 0 || cols <= 0) {
    throw std::invalid_argument("preprocess_fluoro: crop leaves no pixels");
  }

  Image2D out(rows, cols, img.pixel_spacing);

  float max_val = 0.0f;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      max_val = std::max(max_val, img.at(r + crop_px, c + crop_px));
    }
  }
  if (max_val <= 0.0f) {
    max_val = 1.0f;
  }

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double ratio = std::max(static_cast<double>(img.at(r + crop_px, c + crop_px)) / max_val, epsilon);
      out.at(r, c) = static_cast<float>(-std::log(ratio));
    }
  }
  return out;
}

Image2D downsample(const Image2D& img, int factor)
{
  if (factor < 1) {
    throw std::invalid_argument("downsample: factor must be >= 1");
  }
  if (factor == 1) {
    return img;
  }

  const int rows = (img.rows + factor - 1) / factor;
  const int cols = (img.cols + factor - 1) / factor;
  Image2D out(rows, cols, img.pixel_spacing * static_cast<double>(factor));

  for (int r = 0; r < rows; ++r) {
    const int r0 = r * factor;
    const int r1 = std::min(r0 + factor, img.rows);
    for (int c = 0; c < cols; ++c) {
      const int c0 = c * factor;
      const int c1 = std::min(c0 + factor, img.cols);
      double sum = 0.0;
      for (int rr = r0; rr < r1; ++rr) {
        for (int cc = c0; cc < c1; ++cc) {
          sum += img.at(rr, cc);
        }
      }
      out.at(r, c) = static_cast<float>(sum / ((r1 - r0) * (c1 - c0)));
    }
  }
  return out;
}

LabelImage2D downsample_labels(const LabelImage2D& lbl, int factor)
{
  if (factor < 1) {
    throw std::invalid_argument("downsample_labels: factor must be >= 1");
  }
  if (factor == 1) {
    return lbl;
  }
  const int rows = (lbl.rows + factor - 1) / factor;
  const int cols = (lbl.cols + factor - 1) / factor;
  LabelImage2D out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int rr = std::min(r * factor + factor / 2, lbl.rows - 1);
      const int cc = std::min(c * factor + factor / 2, lbl.cols - 1);
      out.at(r, c) = lbl.at(rr, cc);
    }
  }
  return out;
}

GradientPair sobel_gradients(const Image2D& img)
{
  if (img.rows < 3 || img.cols < 3) {
    throw std::invalid_argument("sobel_gradients: image must be at least 3x3");
  }

  GradientPair out{Image2D(img.rows, img.cols, img.pixel_spacing),
                   Image2D(img.rows, img.cols, img.pixel_spacing)};

  const auto px = [&img](int r, int c) {
    r = std::clamp(r, 0, img.rows - 1);
    c = std::clamp(c, 0, img.cols - 1);
    return static_cast<double>(img.at(r, c));
  };

  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double gx = (px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r, c - 1) + px(r + 1, c - 1));
      const double gy = (px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r - 1, c) + px(r - 1, c + 1));
      out.gx.at(r, c) = static_cast<float>(gx);
      out.gy.at(r, c) = static_cast<float>(gy);
    }
  }
  return out;
}

namespace {

std::filesystem::path raw_path_for(const std::filesystem::path& json_path)
{
  std::filesystem::path p = json_path;
  p.replace_extension(".raw");
  return p;
}

void write_raw(const std::filesystem::path& path, const void* data, std::size_t bytes)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::vector<char> read_raw(const std::filesystem::path& path, std::size_t expected_bytes)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::vector<char> buf(expected_bytes);
  f.read(buf.data(), static_cast<std::streamsize>(expected_bytes));
  if (static_cast<std::size_t>(f.gcount()) != expected_bytes) {
    throw std::runtime_error("short read: " + path.string());
  }
  return buf;
}

void write_header(const std::filesystem::path& json_path, const json& dims,
                  const json& spacing, const json& origin, const char* dtype)
{
  json j;
  j["dims"] = dims;
  j["spacing_mm"] = spacing;
  if (!origin.is_null()) {
    j["origin_mm"] = origin;
  }
  j["dtype"] = dtype;
  j["order"] = "x-fastest-le";
  std::ofstream f(json_path);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + json_path.string());
  }
  f << j.dump(2) << "\n";
}

json read_header(const std::filesystem::path& json_path, const char* expect_dtype, std::size_t ndims)
{
  std::ifstream f(json_path);
  if (!f) {
    throw std::runtime_error("cannot open for reading: " + json_path.string());
  }
  json j;
  f >> j;
  if (j.at("dtype").get<std::string>() != expect_dtype) {
    throw std::runtime_error("unexpected dtype in " + json_path.string());
  }
  if (j.at("order").get<std::string>() != "x-fastest-le") {
    throw std::runtime_error("unexpected payload order in " + json_path.string());
  }
  if (j.at("dims").size() != ndims) {
    throw std::runtime_error("unexpected rank in " + json_path.string());
  }
  return j;
}

template <typename T>
void write_volume_impl(const std::filesystem::path& json_path, const VoxelGrid<T>& v, const char* dtype)
{
  write_header(json_path, {v.nx, v.ny, v.nz},
               {v.spacing[0], v.spacing[1], v.spacing[2]},
               {v.origin[0], v.origin[1], v.origin[2]}, dtype);
  write_raw(raw_path_for(json_path), v.voxels.data(), v.voxels.size() * sizeof(T));
}

template <typename T>
VoxelGrid<T> read_volume_impl(const std::filesystem::path& json_path, const char* dtype)
{
  const json j = read_header(json_path, dtype, 3);
  VoxelGrid<T> v;
  v.nx = j["dims"][0].get<int>();
  v.ny = j["dims"][1].get<int>();
  v.nz = j["dims"][2].get<int>();
  for (int i = 0; i < 3; ++i) {
    v.spacing[i] = j["spacing_mm"][i].get<double>();
    v.origin[i] = j["origin_mm"][i].get<double>();
  }
  const std::size_t count = static_cast<std::size_t>(v.nx) * v.ny * v.nz;
  const auto buf = read_raw(raw_path_for(json_path), count * sizeof(T));
  v.voxels.resize(count);
  std::memcpy(v.voxels.data(), buf.data(), buf.size());
  return v;
}

}  // namespace

void write_volume(const std::filesystem::path& json_path, const Volume3D& v)
{
  write_volume_impl(json_path, v, "f32");
}

void write_volume(const std::filesystem::path& json_path, const LabelVolume3D& v)
{
  write_volume_impl(json_path, v, "u8");
}

Volume3D read_volume_f32(const std::filesystem::path& json_path)
{
  return read_volume_impl<float>(json_path, "f32");
}

LabelVolume3D read_volume_u8(const std::filesystem::path& json_path)
{
  return read_volume_impl<std::uint8_t>(json_path, "u8");
}

void write_image(const std::filesystem::path& json_path, const Image2D& img)
{
  write_header(json_path, {img.rows, img.cols},
               {img.pixel_spacing[0], img.pixel_spacing[1]}, nullptr, "f32");
  write_raw(raw_path_for(json_path), img.pixels.data(), img.pixels.size() * sizeof(float));
}

void write_image(const std::filesystem::path& json_path, const LabelImage2D& img)
{
  write_header(json_path, {img.rows, img.cols}, {1.0, 1.0}, nullptr, "u8");
  write_raw(raw_path_for(json_path), img.labels.data(), img.labels.size());
}

Image2D read_image_f32(const std::filesystem::path& json_path)
{
  const json j = read_header(json_path, "f32", 2);
  Image2D img;
  img.rows = j["dims"][0].get<int>();
  img.cols = j["dims"][1].get<int>();
  img.pixel_spacing[0] = j["spacing_mm"][0].get<double>();
  img.pixel_spacing[1] = j["spacing_mm"][1].get<double>();
  const std::size_t count = static_cast<std::size_t>(img.rows) * img.cols;
  const auto buf = read_raw(raw_path_for(json_path), count * sizeof(float));
  img.pixels.resize(count);
  std::memcpy(img.pixels.data(), buf.data(), buf.size());
  return img;
}

LabelImage2D read_image_u8(const std::filesystem::path& json_path)
{
  const json j = read_header(json_path, "u8", 2);
  LabelImage2D img;
  img.rows = j["dims"][0].get<int>();
  img.cols = j["dims"][1].get<int>();
  const std::size_t count = static_cast<std::size_t>(img.rows) * img.cols;
  const auto buf = read_raw(raw_path_for(json_path), count);
  img.labels.resize(count);
  std::memcpy(img.labels.data(), buf.data(), buf.size());
  return img;
}

}  // namespace fregi
