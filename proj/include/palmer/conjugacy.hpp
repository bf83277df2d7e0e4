#pragma once

#include <vector>

#include "palmer/ode_engine.hpp"
#include "palmer/variational.hpp"

namespace palmer {

struct DichotomyEstimate {
  double K = 1.0;
  double alpha = 1.0;
};

struct TruncationConfig {
  double tail_tol = 1e-8;
  double s_min_cap = -200.0;
  double quad_rtol = 1e-9;
};

struct ConjugacyResult {
  Vec value;
  double truncation_point = 0;  // lower limit actually used
  double tail_bound = 0;        // bound on the neglected improper tail
  long quad_nodes = 0;
};

// H(tau, nu) = nu - int_{-inf}^{tau} Psi(tau,s) f(s, phi(s,tau,nu)) ds,
// evaluated by one backward co-integration of the trajectory, the weight
// Psi(tau,s) and the integral. The lower limit is cut where the certified
// tail K mu e^{-alpha (tau - s)} / alpha falls below trunc.tail_tol; if that
// would pass trunc.s_min_cap a TruncationError carries the best effort.
ConjugacyResult conjugacy_at(const SystemDef& sys, double tau, const Vec& nu,
                             const DichotomyEstimate& dich, double mu,
                             const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

// H evaluated along the solution through (0, xi): the point phi(t,0,xi) is
// produced first, then fed to conjugacy_at (the two agree by construction of
// the map restricted to orbits).
ConjugacyResult conjugacy_on_orbit(const SystemDef& sys, const Vec& xi, double t,
                                   const DichotomyEstimate& dich, double mu,
                                   const TruncationConfig& trunc = {},
                                   const IntegratorConfig& cfg = {});

// dH/dx as the stabilized limit of the candidate-Jacobian flow. Throws
// ConvergenceError if the tail criterion is not met before trunc.s_min_cap.
Mat conjugacy_jacobian(const SystemDef& sys, double t, const Vec& x,
                       const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

// Column (i,j) of the second derivative: the stabilized limit of
// Psi(t,s) d2 phi(s,t,x) / dx_j dx_i as s decreases. Requires D2f.
Vec conjugacy_hessian(const SystemDef& sys, double t, const Vec& x, int i, int j,
                      const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

struct InverseOptions {
  double residual_tol = 1e-9;
  int max_newton = 25;
  int max_fixed_point = 200;
};

// x with H(tau, x) = y: Newton seeded at x = y with a damped fixed-point
// fallback x <- y - (H(tau,x) - x).
Vec conjugacy_inverse(const SystemDef& sys, double tau, const Vec& y,
                      const DichotomyEstimate& dich, double mu, const TruncationConfig& trunc = {},
                      const IntegratorConfig& cfg = {}, const InverseOptions& opts = {});

// max over t_grid of | H[t, phi(t,0,xi)] - Psi(t,0) H[0,xi] | in the sup norm.
double conjugacy_defect(const SystemDef& sys, const Vec& xi, const std::vector<double>& t_grid,
                        const DichotomyEstimate& dich, double mu,
                        const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

}  // namespace palmer
