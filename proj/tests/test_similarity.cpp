#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fregi/rng.hpp"
#include "fregi/similarity.hpp"

#include <cmath>

using namespace fregi;

namespace {

Image2D random_image(int rows, int cols, std::uint64_t seed, double lo = 0.0,
                     double hi = 1.0) {
  Image2D img(rows, cols);
  RandomStream rs(seed);
  for (auto& p : img.pixels) p = float(rs.uniform(lo, hi));
  return img;
}

// Direct per-patch reference: Sobel channels, border-clipped inclusive
// rectangles, plain loops.  Mirrors the contract, not the implementation
// (which uses summed-area tables).
double patch_grad_ncc_reference(const Image2D& fixed, const Image2D& moving,
                                const PatchWeights* weights, const PatchParams& p) {
  const GradientPair gf = sobel_gradients(fixed);
  const GradientPair gm = sobel_gradients(moving);
  auto rect_ncc = [](const Image2D& a, const Image2D& b, int r0, int r1, int c0,
                     int c1) {
    double sa = 0, sb = 0;
    const double n = double(r1 - r0 + 1) * (c1 - c0 + 1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        sa += a.at(r, c);
        sb += b.at(r, c);
      }
    const double ma = sa / n, mb = sb / n;
    double vaa = 0, vbb = 0, vab = 0;
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) {
        vaa += (a.at(r, c) - ma) * (a.at(r, c) - ma);
        vbb += (b.at(r, c) - mb) * (b.at(r, c) - mb);
        vab += (a.at(r, c) - ma) * (b.at(r, c) - mb);
      }
    if (vaa / n < 1e-24 || vbb / n < 1e-24) return 0.0;
    return vab / std::sqrt(vaa * vbb);
  };

  double acc = 0, wsum = 0;
  const int grid_rows = patch_grid_len(fixed.rows, p.stride);
  const int grid_cols = patch_grid_len(fixed.cols, p.stride);
  for (int i = 0; i < grid_rows; ++i) {
    for (int j = 0; j < grid_cols; ++j) {
      const double wv = weights ? weights->at(i, j) : 1.0;
      if (wv == 0.0) continue;
      const int r = i * p.stride, c = j * p.stride;
      const int r0 = std::max(0, r - p.patch_radius);
      const int r1 = std::min(fixed.rows - 1, r + p.patch_radius);
      const int c0 = std::max(0, c - p.patch_radius);
      const int c1 = std::min(fixed.cols - 1, c + p.patch_radius);
      acc += wv * 0.5 *
             (rect_ncc(gf.gx, gm.gx, r0, r1, c0, c1) +
              rect_ncc(gf.gy, gm.gy, r0, r1, c0, c1));
      wsum += wv;
    }
  }
  return -acc / wsum;
}

}  // namespace

TEST_CASE("similarity: whole-image NCC against a straightforward reference") {
  const Image2D a = random_image(12, 17, 31);
  Image2D b = random_image(12, 17, 32);

  // Hand-computed reference.
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    sa += a.pixels[i];
    sb += b.pixels[i];
  }
  const double n = double(a.pixels.size());
  const double ma = sa / n, mb = sb / n;
  double num = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    num += (a.pixels[i] - ma) * (b.pixels[i] - mb);
    va += (a.pixels[i] - ma) * (a.pixels[i] - ma);
    vb += (b.pixels[i] - mb) * (b.pixels[i] - mb);
  }
  const double expected = num / std::sqrt(va * vb);
  CHECK(ncc(a, b) == doctest::Approx(expected).epsilon(1e-12));

  CHECK(ncc(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  // Affine intensity changes leave NCC fixed; negation flips the sign.
  Image2D scaled = a;
  for (auto& x : scaled.pixels) x = 3.0f * x + 7.0f;
  CHECK(ncc(a, scaled) == doctest::Approx(1.0).epsilon(1e-6));
  Image2D neg = a;
  for (auto& x : neg.pixels) x = -x;
  CHECK(ncc(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));

  bool degenerate = false;
  Image2D flat(12, 17, Vec2(1, 1), 4.0f);
  CHECK(ncc(a, flat, &degenerate) == 0.0);
  CHECK(degenerate);

  Image2D wrong(11, 17);
  CHECK_THROWS_AS(ncc(a, wrong), std::invalid_argument);
  CHECK_THROWS_AS(ncc(Image2D{}, Image2D{}), std::invalid_argument);
}

TEST_CASE("similarity: patch gradient NCC equals the direct reference") {
  for (int stride : {1, 2, 5}) {
    for (int radius : {1, 3, 5}) {
      PatchParams p;
      p.patch_radius = radius;
      p.stride = stride;
      const Image2D f = random_image(21, 26, 41 + stride);
      const Image2D m = random_image(21, 26, 52 + radius);
      const double got = patch_grad_ncc(f, m, nullptr, p);
      const double want = patch_grad_ncc_reference(f, m, nullptr, p);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
      CHECK(got > -1.0);
      CHECK(got < 1.0);
    }
  }
}

TEST_CASE("similarity: perfect match scores -1, inverted match scores +1") {
  const Image2D f = random_image(18, 18, 61);
  CHECK(patch_grad_ncc(f, f) == doctest::Approx(-1.0).epsilon(1e-9));

  Image2D neg = f;
  for (auto& x : neg.pixels) x = -x;
  CHECK(patch_grad_ncc(f, neg) == doctest::Approx(1.0).epsilon(1e-9));

  // Positive affine transforms of the moving image do not change the score.
  Image2D aff = f;
  for (auto& x : aff.pixels) x = 2.5f * x + 11.0f;
  CHECK(patch_grad_ncc(f, aff) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("similarity: flat images are degenerate, not errors") {
  const Image2D flat(16, 16, Vec2(1, 1), 3.0f);
  const Image2D tex = random_image(16, 16, 71);
  // Every patch channel of the flat image has zero variance -> all zeros.
  CHECK(patch_grad_ncc(flat, tex) == doctest::Approx(0.0));
  CHECK(patch_grad_ncc(tex, flat) == doctest::Approx(0.0));
}

TEST_CASE("similarity: weights select which patches count") {
  PatchParams p;
  p.patch_radius = 2;
  p.stride = 1;
  const Image2D f = random_image(20, 20, 81);
  Image2D corrupted = f;
  // Corrupt the lower-right corner block only.
  RandomStream rs(82);
  for (int r = 14; r < 20; ++r)
    for (int c = 14; c < 20; ++c) corrupted.at(r, c) = float(rs.uniform(0.0, 1.0));

  PatchWeights w = uniform_patch_weights(20, 20, p);
  // Down-weight everything the corruption can touch (patch reach + Sobel halo).
  for (int i = 0; i < w.rows; ++i)
    for (int j = 0; j < w.cols; ++j)
      if (i >= 11 && j >= 11) w.at(i, j) = 0.0;

  const double masked = patch_grad_ncc(f, corrupted, &w, p);
  const double clean = patch_grad_ncc(f, f, &w, p);
  CHECK(masked == doctest::Approx(clean).epsilon(1e-9));
  // Unmasked, the corruption must hurt the score.
  CHECK(patch_grad_ncc(f, corrupted, nullptr, p) > masked + 1e-3);

  // Fractional weights follow the weighted-mean contract exactly.
  RandomStream rw(83);
  for (auto& x : w.w) x = rw.uniform(0.0, 2.0);
  CHECK(patch_grad_ncc(f, corrupted, &w, p) ==
        doctest::Approx(patch_grad_ncc_reference(f, corrupted, &w, p)).epsilon(1e-10));
}

TEST_CASE("similarity: label-derived weights mark patch centers") {
  LabelImage2D lbl(10, 12);
  lbl.at(0, 0) = 1;
  lbl.at(4, 6) = 2;
  lbl.at(9, 11) = 5;
  PatchParams p;
  p.stride = 2;
  const PatchWeights w = patch_weights_from_labels(lbl, {1, 2}, p);
  CHECK(w.rows == 5);
  CHECK(w.cols == 6);
  CHECK(w.at(0, 0) == 1.0);  // center (0,0) labeled 1
  CHECK(w.at(2, 3) == 1.0);  // center (4,6) labeled 2
  CHECK(w.at(4, 5) == 0.0);  // center (8,10) unlabeled; class 5 not included
  int ones = 0;
  for (double x : w.w) ones += (x == 1.0);
  CHECK(ones == 2);
}

TEST_CASE("similarity: argument validation") {
  const Image2D f = random_image(10, 10, 91);
  const Image2D m = random_image(10, 11, 92);
  CHECK_THROWS_AS(patch_grad_ncc(f, m), std::invalid_argument);

  PatchParams bad;
  bad.patch_radius = 0;
  CHECK_THROWS_AS(patch_grad_ncc(f, f, nullptr, bad), std::invalid_argument);

  PatchWeights w = uniform_patch_weights(10, 10);
  w.w[3] = -0.5;
  CHECK_THROWS_AS(patch_grad_ncc(f, f, &w), std::invalid_argument);
  for (auto& x : w.w) x = 0.0;
  CHECK_THROWS_AS(patch_grad_ncc(f, f, &w), std::invalid_argument);

  PatchWeights mismatched = uniform_patch_weights(9, 10);
  CHECK_THROWS_AS(patch_grad_ncc(f, f, &mismatched), std::invalid_argument);
}
