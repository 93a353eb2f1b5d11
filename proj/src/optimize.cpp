#include "fregi/optimize.hpp"

#include "fregi/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fregi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim_match(const BoxConstraints& box, const VecX& v, const char* what) {
  if (v.size() != box.lower.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch with box");
  }
}

}  // namespace

void BoxConstraints::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw std::invalid_argument("box constraints: empty or mismatched bounds");
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) {
      throw std::invalid_argument("box constraints: lower > upper");
    }
  }
}

bool BoxConstraints::contains(const VecX& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (int i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

VecX BoxConstraints::clamp(const VecX& x) const {
  VecX out = x;
  for (int i = 0; i < x.size(); ++i) {
    out[i] = std::clamp(out[i], lower[i], upper[i]);
  }
  return out;
}

BoxConstraints BoxConstraints::symmetric(const VecX& half) {
  BoxConstraints b;
  b.lower = -half;
  b.upper = half;
  return b;
}

// --- exhaustive grid ---------------------------------------------------------

OptimizerReport minimize_grid(const ObjectiveFn& obj, const BoxConstraints& box,
                              const VecX& increments, ThreadPool* pool,
                              std::size_t lattice_cap) {
  box.validate();
  require_dim_match(box, increments, "minimize_grid");
  const int n = box.dim();
  std::vector<std::size_t> counts(n);
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (increments[i] <= 0.0) {
      throw std::invalid_argument("minimize_grid: increments must be positive");
    }
    const double width = box.upper[i] - box.lower[i];
    counts[i] = std::size_t(std::floor(width / increments[i] + 1e-9)) + 1;
    if (counts[i] != 0 && total > lattice_cap / counts[i]) {
      throw std::length_error("minimize_grid: lattice exceeds the configured cap");
    }
    total *= counts[i];
  }

  auto lattice_point = [&](std::size_t flat) {
    VecX x(n);
    // Lexicographic flat index: dimension 0 varies slowest.
    for (int i = n - 1; i >= 0; --i) {
      const std::size_t k = flat % counts[i];
      flat /= counts[i];
      x[i] = box.lower[i] + double(k) * increments[i];
    }
    return x;
  };

  OptimizerReport rep;
  rep.best_value = kInf;
  const std::size_t chunk = 4096;
  std::vector<VecX> pts;
  for (std::size_t start = 0; start < total; start += chunk) {
    const std::size_t end = std::min(total, start + chunk);
    pts.clear();
    for (std::size_t i = start; i < end; ++i) pts.push_back(lattice_point(i));
    const std::vector<double> vals = batch_eval(pool, pts, obj);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      // Strict < keeps the lexicographically smallest index on ties.
      if (vals[i] < rep.best_value) {
        rep.best_value = vals[i];
        rep.best_point = pts[i];
      }
    }
    rep.eval_count += vals.size();
    rep.trace.push_back(rep.best_value);
  }
  return rep;
}

// --- differential evolution --------------------------------------------------

OptimizerReport minimize_de(const ObjectiveFn& obj, const BoxConstraints& box,
                            const DeParams& params, std::uint64_t seed,
                            ThreadPool* pool) {
  box.validate();
  if (params.pop < 4) throw std::invalid_argument("minimize_de: population must be >= 4");
  const int n = box.dim();
  const int pop = params.pop;
  RandomStream rng(seed);

  std::vector<VecX> xs(pop);
  for (int i = 0; i < pop; ++i) {
    VecX x(n);
    for (int j = 0; j < n; ++j) x[j] = rng.uniform(box.lower[j], box.upper[j]);
    xs[i] = x;
  }
  std::vector<double> fs = batch_eval(pool, xs, obj);

  OptimizerReport rep;
  rep.best_value = kInf;
  auto note_best = [&](const VecX& x, double f) {
    if (f < rep.best_value) {
      rep.best_value = f;
      rep.best_point = x;
    }
  };
  for (int i = 0; i < pop; ++i) note_best(xs[i], fs[i]);
  rep.eval_count = fs.size();
  rep.trace.push_back(rep.best_value);

  std::vector<VecX> trials(pop);
  for (int it = 0; it < params.iters; ++it) {
    for (int i = 0; i < pop; ++i) {
      int r1, r2, r3;
      do { r1 = int(rng.uint_below(pop)); } while (r1 == i);
      do { r2 = int(rng.uint_below(pop)); } while (r2 == i || r2 == r1);
      do { r3 = int(rng.uint_below(pop)); } while (r3 == i || r3 == r1 || r3 == r2);
      const double f_rate = rng.uniform(params.dither_lo, params.dither_hi);
      const int j_rand = int(rng.uint_below(n));
      VecX t = xs[i];
      for (int j = 0; j < n; ++j) {
        if (j == j_rand || rng.u01() < params.cr) {
          t[j] = xs[r1][j] + f_rate * (xs[r2][j] - xs[r3][j]);
        }
      }
      trials[i] = box.clamp(t);
    }
    const std::vector<double> tf = batch_eval(pool, trials, obj);
    rep.eval_count += tf.size();
    for (int i = 0; i < pop; ++i) {
      if (tf[i] <= fs[i]) {
        xs[i] = trials[i];
        fs[i] = tf[i];
        note_best(xs[i], fs[i]);
      }
    }
    rep.trace.push_back(rep.best_value);
  }
  return rep;
}

// --- particle swarm ----------------------------------------------------------

OptimizerReport minimize_pso(const ObjectiveFn& obj, const BoxConstraints& box,
                             const PsoParams& params, std::uint64_t seed,
                             ThreadPool* pool) {
  box.validate();
  if (params.particles < 1) throw std::invalid_argument("minimize_pso: need particles >= 1");
  const int n = box.dim();
  const int np = params.particles;
  VecX width = box.upper - box.lower;

  // One RNG stream per particle: draw order inside a particle is fixed, so
  // the swarm is reproducible no matter how evaluations are scheduled.
  std::vector<RandomStream> streams;
  streams.reserve(np);
  for (int i = 0; i < np; ++i) streams.emplace_back(seed, std::uint64_t(i));

  std::vector<VecX> xs(np), vs(np), pbest(np);
  for (int i = 0; i < np; ++i) {
    VecX x(n), v(n);
    for (int j = 0; j < n; ++j) x[j] = streams[i].uniform(box.lower[j], box.upper[j]);
    for (int j = 0; j < n; ++j) v[j] = streams[i].uniform(-width[j], width[j]);
    xs[i] = x;
    vs[i] = v;
    pbest[i] = x;
  }
  std::vector<double> fs = batch_eval(pool, xs, obj);
  std::vector<double> pbest_f = fs;

  OptimizerReport rep;
  rep.best_value = kInf;
  for (int i = 0; i < np; ++i) {
    if (fs[i] < rep.best_value) {
      rep.best_value = fs[i];
      rep.best_point = xs[i];
    }
  }
  rep.eval_count = fs.size();
  rep.trace.push_back(rep.best_value);

  for (int it = 0; it < params.iters; ++it) {
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < n; ++j) {
        const double rp = streams[i].uniform(0.0, params.phi_p);
        const double rg = streams[i].uniform(0.0, params.phi_g);
        double v = params.omega * vs[i][j] + rp * (pbest[i][j] - xs[i][j]) +
                   rg * (rep.best_point[j] - xs[i][j]);
        v = std::clamp(v, -width[j], width[j]);
        vs[i][j] = v;
        xs[i][j] = std::clamp(xs[i][j] + v, box.lower[j], box.upper[j]);
      }
    }
    fs = batch_eval(pool, xs, obj);
    rep.eval_count += fs.size();
    for (int i = 0; i < np; ++i) {
      if (fs[i] < pbest_f[i]) {
        pbest_f[i] = fs[i];
        pbest[i] = xs[i];
      }
    }
    for (int i = 0; i < np; ++i) {
      if (pbest_f[i] < rep.best_value) {
        rep.best_value = pbest_f[i];
        rep.best_point = pbest[i];
      }
    }
    rep.trace.push_back(rep.best_value);
  }
  return rep;
}

// --- CMA-ES ------------------------------------------------------------------

OptimizerReport minimize_cmaes(const ObjectiveFn& obj, const VecX& init,
                               const VecX& init_sigma, const CmaesParams& params,
                               const ObjectiveFn* penalty, std::uint64_t seed,
                               ThreadPool* pool) {
  const int n = int(init.size());
  if (n == 0) throw std::invalid_argument("minimize_cmaes: empty init");
  if (init_sigma.size() != n) throw std::invalid_argument("minimize_cmaes: sigma dim mismatch");
  for (int i = 0; i < n; ++i) {
    if (init_sigma[i] <= 0.0) throw std::invalid_argument("minimize_cmaes: sigma must be > 0");
  }
  const int lambda = params.pop;
  if (lambda < 4) throw std::invalid_argument("minimize_cmaes: population must be >= 4");

  // Per-coordinate initial scales become a fixed diagonal pre-scaling; the
  // strategy itself runs with a single global step size in the scaled space.
  const VecX scale = init_sigma;
  auto to_world = [&](const VecX& y) -> VecX { return init + scale.cwiseProduct(y); };
  auto total_obj = [&](const VecX& x) {
    return obj(x) + (penalty ? (*penalty)(x) : 0.0);
  };

  const int mu = lambda / 2;
  VecX weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mu_eff = 1.0 / weights.squaredNorm();

  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double cc = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                            ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi_n = std::sqrt(double(n)) *
                       (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * double(n) * n));

  RandomStream rng(seed);
  VecX mean = VecX::Zero(n);
  double sigma = 1.0;
  MatX cov = MatX::Identity(n, n);
  VecX p_sigma = VecX::Zero(n);
  VecX p_c = VecX::Zero(n);

  OptimizerReport rep;
  rep.best_value = kInf;

  double cond = 1.0;
  for (int iter = 0; iter < params.max_iters; ++iter) {
    Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (cov + cov.transpose()));
    VecX evals = eig.eigenvalues().cwiseMax(1e-30);
    const MatX& b_mat = eig.eigenvectors();
    const VecX d_diag = evals.cwiseSqrt();
    cond = evals.maxCoeff() / evals.minCoeff();

    std::vector<VecX> zs(lambda), ys(lambda), pts(lambda);
    for (int k = 0; k < lambda; ++k) {
      VecX z(n);
      for (int j = 0; j < n; ++j) z[j] = rng.gauss();
      zs[k] = z;
      ys[k] = b_mat * d_diag.cwiseProduct(z);
      pts[k] = to_world(mean + sigma * ys[k]);
    }
    const std::vector<double> fs = batch_eval(pool, pts, total_obj);
    rep.eval_count += fs.size();

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs[a] < fs[b]; });

    if (fs[order[0]] < rep.best_value) {
      rep.best_value = fs[order[0]];
      rep.best_point = pts[order[0]];
    }
    rep.trace.push_back(rep.best_value);

    VecX y_w = VecX::Zero(n);
    VecX z_w = VecX::Zero(n);
    for (int i = 0; i < mu; ++i) {
      y_w += weights[i] * ys[order[i]];
      z_w += weights[i] * zs[order[i]];
    }
    mean += sigma * y_w;

    p_sigma = (1.0 - c_sigma) * p_sigma +
              std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (b_mat * z_w);
    const double expected_decay =
        std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (iter + 1)));
    const bool h_sigma =
        p_sigma.norm() / expected_decay < (1.4 + 2.0 / (n + 1.0)) * chi_n;
    p_c = (1.0 - cc) * p_c +
          (h_sigma ? std::sqrt(cc * (2.0 - cc) * mu_eff) : 0.0) * y_w;

    MatX rank_mu = MatX::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      rank_mu += weights[i] * (ys[order[i]] * ys[order[i]].transpose());
    }
    const double delta_h = h_sigma ? 0.0 : cc * (2.0 - cc);
    cov = (1.0 - c1 - cmu) * cov +
          c1 * (p_c * p_c.transpose() + delta_h * cov) + cmu * rank_mu;

    sigma *= std::exp((c_sigma / d_sigma) * (p_sigma.norm() / chi_n - 1.0));

    const double spread = fs[order[lambda - 1]] - fs[order[0]];
    if (iter > 10 && spread < params.tol_fun) break;
    if (sigma * d_diag.maxCoeff() < params.tol_sigma) break;
  }
  rep.stats["cov_condition"] = cond;
  return rep;
}

// --- bound-constrained trust-region quadratic interpolation ------------------
//
// Stands in for BOBYQA: full quadratic models ((n+1)(n+2)/2 interpolation
// points) inside an infinity-norm trust region intersected with the box.
// Exact on quadratic objectives; all evaluated points stay feasible.

namespace {

struct QuadModel {
  double c = 0.0;
  VecX g;   // gradient at the model center
  MatX h;   // symmetric Hessian
  VecX center;

  double eval(const VecX& z) const {
    const VecX d = z - center;
    return c + g.dot(d) + 0.5 * d.dot(h * d);
  }
  VecX grad(const VecX& z) const { return g + h * (z - center); }
};

// Interpolation set: center, axis points (sign-flipped near bounds), and one
// cross point per axis pair, all with displacement delta and kept in [0, 1].
std::vector<VecX> interpolation_set(const VecX& center, double delta, int n) {
  std::vector<VecX> pts;
  pts.push_back(center);
  VecX sign(n);
  for (int i = 0; i < n; ++i) {
    sign[i] = (center[i] + delta <= 1.0) ? 1.0 : -1.0;
  }
  for (int i = 0; i < n; ++i) {
    VecX a = center;
    a[i] += sign[i] * delta;
    pts.push_back(a);
    VecX b = center;
    const double back = center[i] - sign[i] * delta;
    if (back >= 0.0 && back <= 1.0) {
      b[i] = back;
    } else {
      b[i] = center[i] + sign[i] * 2.0 * delta;  // one-sided pair near a bound
    }
    pts.push_back(b);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      VecX p = center;
      p[i] += sign[i] * delta;
      p[j] += sign[j] * delta;
      pts.push_back(p);
    }
  }
  return pts;
}

QuadModel fit_quadratic(const std::vector<VecX>& pts, const std::vector<double>& vals,
                        const VecX& center) {
  const int n = int(center.size());
  const int m = int(pts.size());
  const int terms = 1 + n + n * (n + 1) / 2;
  MatX a(m, terms);
  for (int r = 0; r < m; ++r) {
    const VecX d = pts[r] - center;
    int col = 0;
    a(r, col++) = 1.0;
    for (int i = 0; i < n; ++i) a(r, col++) = d[i];
    for (int i = 0; i < n; ++i) a(r, col++) = 0.5 * d[i] * d[i];
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) a(r, col++) = d[i] * d[j];
    }
  }
  VecX f(m);
  for (int r = 0; r < m; ++r) f[r] = vals[r];
  const VecX theta = a.colPivHouseholderQr().solve(f);

  QuadModel q;
  q.center = center;
  q.c = theta[0];
  q.g = theta.segment(1, n);
  q.h = MatX::Zero(n, n);
  int col = 1 + n;
  for (int i = 0; i < n; ++i) q.h(i, i) = theta[col++];
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      q.h(i, j) = q.h(j, i) = theta[col++];
    }
  }
  return q;
}

// Minimizes the model over box([0,1]) ∩ {||z - center||_inf <= radius} by a
// Newton attempt followed by cyclic coordinate descent (each 1D restriction of
// a quadratic has a closed-form box minimizer).
VecX solve_subproblem(const QuadModel& q, const VecX& center, double radius) {
  const int n = int(center.size());
  VecX lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    lo[i] = std::max(0.0, center[i] - radius);
    hi[i] = std::min(1.0, center[i] + radius);
  }

  Eigen::LDLT<MatX> ldlt(q.h);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const VecX newton = q.center - ldlt.solve(q.g);
    bool inside = true;
    for (int i = 0; i < n; ++i) {
      if (newton[i] < lo[i] || newton[i] > hi[i]) {
        inside = false;
        break;
      }
    }
    if (inside) return newton;
  }

  VecX z = center;
  for (int sweep = 0; sweep < 200; ++sweep) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gi = q.g[i] + q.h.row(i).dot(z - q.center);
      const double hii = q.h(i, i);
      double zi;
      if (hii > 1e-30) {
        zi = std::clamp(z[i] - gi / hii, lo[i], hi[i]);
      } else {
        // Non-convex axis: the 1D minimum sits at whichever end descends.
        zi = gi > 0.0 ? lo[i] : hi[i];
        const double alt = gi > 0.0 ? hi[i] : lo[i];
        VecX za = z, zb = z;
        za[i] = zi;
        zb[i] = alt;
        if (q.eval(zb) < q.eval(za)) zi = alt;
      }
      moved += std::abs(zi - z[i]);
      z[i] = zi;
    }
    if (moved < 1e-15) break;
  }
  return z;
}

}  // namespace

OptimizerReport minimize_bobyqa(const ObjectiveFn& obj, const VecX& init,
                                const BoxConstraints& box, const BobyqaParams& params,
                                ThreadPool* pool) {
  box.validate();
  require_dim_match(box, init, "minimize_bobyqa");
  const int n = box.dim();
  VecX range = box.upper - box.lower;
  for (int i = 0; i < n; ++i) {
    if (range[i] <= 0.0) {
      throw std::invalid_argument("minimize_bobyqa: zero-width box dimension");
    }
  }

  // Work in box-normalized coordinates, z in [0, 1]^n.
  auto to_world = [&](const VecX& z) -> VecX {
    return box.lower + range.cwiseProduct(z);
  };
  OptimizerReport rep;
  rep.best_value = kInf;

  VecX z0(n);
  bool nudged = false;
  for (int i = 0; i < n; ++i) {
    z0[i] = (init[i] - box.lower[i]) / range[i];
    const double margin = 1e-6;
    const double clipped = std::clamp(z0[i], margin, 1.0 - margin);
    if (clipped != z0[i]) nudged = true;
    z0[i] = clipped;
  }
  if (nudged) {
    std::fprintf(stderr,
                 "minimize_bobyqa: initial point on or outside the box; "
                 "nudged inward\n");
    rep.stats["init_nudged"] = 1.0;
  }

  auto eval_world = [&](const VecX& z) { return obj(to_world(z)); };

  double radius = std::clamp(params.initial_radius_frac, 1e-8, 0.5);
  VecX z_c = z0;
  double f_c = eval_world(z_c);
  rep.eval_count = 1;
  rep.best_value = f_c;
  rep.best_point = to_world(z_c);
  rep.trace.push_back(f_c);

  double model_delta = -1.0;  // spread of the current interpolation set
  QuadModel model;
  bool have_model = false;

  while (radius >= params.final_radius && rep.eval_count < params.max_evals) {
    if (!have_model || model_delta > 2.0 * radius ||
        (model.center - z_c).lpNorm<Eigen::Infinity>() > 1e-15) {
      const double delta = std::max(radius * 0.5, params.final_radius * 0.5);
      std::vector<VecX> pts = interpolation_set(z_c, delta, n);
      std::vector<VecX> world_pts(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) world_pts[i] = to_world(pts[i]);
      const std::vector<double> vals = batch_eval(pool, world_pts, obj);
      rep.eval_count += vals.size();
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] < rep.best_value) {
          rep.best_value = vals[i];
          rep.best_point = world_pts[i];
        }
      }
      model = fit_quadratic(pts, vals, z_c);
      model_delta = delta;
      have_model = true;
      f_c = vals[0];  // pts[0] is the center itself
      if (rep.eval_count >= params.max_evals) break;
    }

    const VecX z_new = solve_subproblem(model, z_c, radius);
    const double predicted = model.eval(z_c) - model.eval(z_new);
    const double step = (z_new - z_c).lpNorm<Eigen::Infinity>();
    if (predicted <= 1e-16 || step < 1e-16) {
      radius *= 0.5;
      rep.trace.push_back(rep.best_value);
      continue;
    }

    const double f_new = eval_world(z_new);
    ++rep.eval_count;
    if (f_new < rep.best_value) {
      rep.best_value = f_new;
      rep.best_point = to_world(z_new);
    }
    const double rho = (f_c - f_new) / predicted;
    if (f_new < f_c) {
      z_c = z_new;
      f_c = f_new;
      have_model = false;  // recenter the model on the next pass
    }
    if (rho < 0.25) {
      radius *= 0.5;
    } else if (rho > 0.75 && step > 0.9 * radius) {
      radius = std::min(2.0 * radius, 0.5);
    }
    rep.trace.push_back(rep.best_value);
  }

  rep.trace.push_back(rep.best_value);
  return rep;
}

}  // namespace fregi
