#pragma once

#include "fregi/threading.hpp"
#include "fregi/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace fregi {

using ObjectiveFn = std::function<double(const VecX&)>;

struct BoxConstraints {
  VecX lower, upper;

  int dim() const { return int(lower.size()); }
  void validate() const;
  bool contains(const VecX& x, double tol = 0.0) const;
  VecX clamp(const VecX& x) const;

  // Symmetric box [-half, +half] around zero.
  static BoxConstraints symmetric(const VecX& half);
};

struct OptimizerReport {
  VecX best_point;
  double best_value = 0.0;
  std::size_t eval_count = 0;
  std::vector<double> trace;  // best-so-far after each iteration
  std::map<std::string, double> stats;
};

// Exhaustive evaluation of the lattice {lower + k*inc : k >= 0, <= upper}.
// Ties resolve to the lexicographically smallest lattice index.  Refuses
// lattices larger than lattice_cap points.
OptimizerReport minimize_grid(const ObjectiveFn& obj, const BoxConstraints& box,
                              const VecX& increments, ThreadPool* pool = nullptr,
                              std::size_t lattice_cap = 100000000);

struct DeParams {
  int iters = 400;
  int pop = 1000;
  double cr = 0.2;
  double dither_lo = 0.5, dither_hi = 1.0;  // F ~ U(lo, hi) per mutation vector
};

// Differential evolution, rand/1/bin variant, candidates clamped to the box.
OptimizerReport minimize_de(const ObjectiveFn& obj, const BoxConstraints& box,
                            const DeParams& params, std::uint64_t seed,
                            ThreadPool* pool = nullptr);

struct PsoParams {
  int iters = 50;
  int particles = 21000;
  double omega = 0.7298;
  double phi_p = 1.4961;
  double phi_g = 1.4961;
};

// Synchronous global-best particle swarm; velocities clamped to the box width,
// positions clamped to the box.  Each particle draws from its own RNG stream
// so results do not depend on evaluation order.
OptimizerReport minimize_pso(const ObjectiveFn& obj, const BoxConstraints& box,
                             const PsoParams& params, std::uint64_t seed,
                             ThreadPool* pool = nullptr);

struct CmaesParams {
  int pop = 100;
  int max_iters = 300;
  double tol_fun = 1e-12;    // stop when the population value spread drops below
  double tol_sigma = 1e-14;  // stop when the global step size collapses
};

// (mu/mu_w, lambda) covariance matrix adaptation evolution strategy.
// Per-coordinate initial scales act as a fixed diagonal pre-scaling of the
// search space; one global step size adapts on top.  No box constraints.
// When penalty is non-null the optimized function is obj(x) + penalty(x).
OptimizerReport minimize_cmaes(const ObjectiveFn& obj, const VecX& init,
                               const VecX& init_sigma, const CmaesParams& params,
                               const ObjectiveFn* penalty, std::uint64_t seed,
                               ThreadPool* pool = nullptr);

struct BobyqaParams {
  double initial_radius_frac = 0.1;  // first trust-region radius, fraction of box range
  double final_radius = 1e-9;        // stop when the radius shrinks below this
  std::size_t max_evals = 20000;
};

// Derivative-free bound-constrained trust-region method with full quadratic
// interpolation models ((n+1)(n+2)/2 points per model).  Exact on quadratics;
// the final point is always feasible.  An initial point on the boundary is
// nudged inward by 1e-6 of the box range.
OptimizerReport minimize_bobyqa(const ObjectiveFn& obj, const VecX& init,
                                const BoxConstraints& box,
                                const BobyqaParams& params = {},
                                ThreadPool* pool = nullptr);

}  // namespace fregi
