#include "fregi/similarity.hpp"

#include <cmath>
#include <stdexcept>

namespace fregi {

namespace {

// Summed-area table with a zero top row / left column so rectangle sums are
// four lookups regardless of position.
struct Sat {
  int rows = 0, cols = 0;
  std::vector<double> s;

  explicit Sat(const Image2D& img) : rows(img.rows), cols(img.cols) {
    s.assign(std::size_t(rows + 1) * (cols + 1), 0.0);
    build(img, [](float a, float) { return double(a); }, img);
  }
  Sat(const Image2D& a, const Image2D& b) : rows(a.rows), cols(a.cols) {
    s.assign(std::size_t(rows + 1) * (cols + 1), 0.0);
    build(a, [](float x, float y) { return double(x) * double(y); }, b);
  }

  template <typename F>
  void build(const Image2D& a, F f, const Image2D& b) {
    for (int r = 0; r < rows; ++r) {
      double run = 0.0;
      for (int c = 0; c < cols; ++c) {
        run += f(a.at(r, c), b.at(r, c));
        s[idx(r + 1, c + 1)] = s[idx(r, c + 1)] + run;
      }
    }
  }

  std::size_t idx(int r, int c) const { return std::size_t(r) * (cols + 1) + c; }

  // Inclusive rectangle [r0,r1] x [c0,c1].
  double sum(int r0, int r1, int c0, int c1) const {
    return s[idx(r1 + 1, c1 + 1)] - s[idx(r0, c1 + 1)] - s[idx(r1 + 1, c0)] +
           s[idx(r0, c0)];
  }
};

Sat squared(const Image2D& img) { return Sat(img, img); }

constexpr double kVarEps = 1e-24;

}  // namespace

PatchWeights uniform_patch_weights(int image_rows, int image_cols, const PatchParams& p) {
  if (p.stride < 1) throw std::invalid_argument("patch stride must be >= 1");
  PatchWeights w;
  w.rows = patch_grid_len(image_rows, p.stride);
  w.cols = patch_grid_len(image_cols, p.stride);
  w.w.assign(std::size_t(w.rows) * w.cols, 1.0);
  return w;
}

PatchWeights patch_weights_from_labels(const LabelImage2D& lbl,
                                       const std::set<std::uint8_t>& included,
                                       const PatchParams& p) {
  if (p.stride < 1) throw std::invalid_argument("patch stride must be >= 1");
  PatchWeights w;
  w.rows = patch_grid_len(lbl.rows, p.stride);
  w.cols = patch_grid_len(lbl.cols, p.stride);
  w.w.assign(std::size_t(w.rows) * w.cols, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    for (int j = 0; j < w.cols; ++j) {
      if (included.count(lbl.at(i * p.stride, j * p.stride))) w.at(i, j) = 1.0;
    }
  }
  return w;
}

double ncc(const Image2D& a, const Image2D& b, bool* degenerate) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument("ncc: image dims differ");
  }
  const std::size_t n = a.pixels.size();
  if (n == 0) throw std::invalid_argument("ncc: empty image");
  if (degenerate) *degenerate = false;
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a.pixels[i];
    sb += b.pixels[i];
  }
  const double ma = sa / double(n);
  const double mb = sb / double(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.pixels[i] - ma;
    const double db = b.pixels[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  const double var_a = saa / double(n);
  const double var_b = sbb / double(n);
  if (var_a < kVarEps || var_b < kVarEps) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sab / (double(n) * std::sqrt(var_a) * std::sqrt(var_b));
}

double patch_grad_ncc(const Image2D& fixed, const Image2D& moving,
                      const PatchWeights* weights, const PatchParams& p) {
  if (fixed.rows != moving.rows || fixed.cols != moving.cols) {
    throw std::invalid_argument("patch_grad_ncc: image dims differ");
  }
  if (p.patch_radius < 1 || p.stride < 1) {
    throw std::invalid_argument("patch_grad_ncc: radius and stride must be >= 1");
  }
  const GradientPair gf = sobel_gradients(fixed);
  const GradientPair gm = sobel_gradients(moving);

  // Per-channel rectangle sums of f, m, f^2, m^2, f*m.
  struct ChannelSats {
    Sat f, m, ff, mm, fm;
    ChannelSats(const Image2D& fi, const Image2D& mi)
        : f(fi), m(mi), ff(squared(fi)), mm(squared(mi)), fm(fi, mi) {}
  };
  const ChannelSats cx(gf.gx, gm.gx);
  const ChannelSats cy(gf.gy, gm.gy);

  const int grid_rows = patch_grid_len(fixed.rows, p.stride);
  const int grid_cols = patch_grid_len(fixed.cols, p.stride);
  if (weights && (weights->rows != grid_rows || weights->cols != grid_cols)) {
    throw std::invalid_argument("patch_grad_ncc: weight grid dims mismatch");
  }

  auto channel_ncc = [&](const ChannelSats& ch, int r0, int r1, int c0, int c1) {
    const double cnt = double(r1 - r0 + 1) * double(c1 - c0 + 1);
    const double mf = ch.f.sum(r0, r1, c0, c1) / cnt;
    const double mm_ = ch.m.sum(r0, r1, c0, c1) / cnt;
    const double vf = ch.ff.sum(r0, r1, c0, c1) / cnt - mf * mf;
    const double vm = ch.mm.sum(r0, r1, c0, c1) / cnt - mm_ * mm_;
    if (vf < kVarEps || vm < kVarEps) return 0.0;
    const double cov = ch.fm.sum(r0, r1, c0, c1) / cnt - mf * mm_;
    return cov / (std::sqrt(vf) * std::sqrt(vm));
  };

  double acc = 0.0;
  double wsum = 0.0;
  for (int i = 0; i < grid_rows; ++i) {
    const int r = i * p.stride;
    const int r0 = std::max(0, r - p.patch_radius);
    const int r1 = std::min(fixed.rows - 1, r + p.patch_radius);
    for (int j = 0; j < grid_cols; ++j) {
      const double wv = weights ? weights->at(i, j) : 1.0;
      if (wv < 0.0) throw std::invalid_argument("patch_grad_ncc: negative weight");
      if (wv == 0.0) continue;
      const int c = j * p.stride;
      const int c0 = std::max(0, c - p.patch_radius);
      const int c1 = std::min(fixed.cols - 1, c + p.patch_radius);
      const double v = 0.5 * (channel_ncc(cx, r0, r1, c0, c1) +
                              channel_ncc(cy, r0, r1, c0, c1));
      acc += wv * v;
      wsum += wv;
    }
  }
  if (wsum <= 0.0) throw std::invalid_argument("patch_grad_ncc: all weights zero");
  return -acc / wsum;
}

}  // namespace fregi
