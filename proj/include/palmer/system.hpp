#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "palmer/errors.hpp"
#include "palmer/linalg.hpp"

namespace palmer {

// Stacked Hessians of a vector field: tensor[i](j,k) = d2 f_i / dx_j dx_k.
using Tensor3 = std::vector<Mat>;

// Optional closed forms attached to the built-in presets. Tests use these as
// independent references; nothing in the solvers reads them.
struct OraclePack {
  std::function<Mat(double t, double s)> transition;
  // Limit candidate for the conjugacy Jacobian flow, anchored at x(t).
  std::function<Mat(double s, double t, const Vec& x_t)> jacobian_flow;
  // d phi(s,t,x)/dx for the nonlinear flow.
  std::function<Mat(double s, double t, const Vec& x_t)> flow_jacobian;
  // Full-limit conjugacy Jacobian at (t, x).
  std::function<Mat(double t, const Vec& x)> conjugacy_jacobian;
};

// Quasilinear system x' = A(t) x + f(t, x).
struct SystemDef {
  int n = 0;
  std::function<Mat(double)> A;
  std::function<Vec(double, const Vec&)> f;
  std::function<Mat(double, const Vec&)> Df;
  std::function<Tensor3(double, const Vec&)> D2f;  // may be empty
  bool vanishes_at_origin = false;                 // f(t, 0) = 0 asserted
  std::string name;
  OraclePack oracle;

  bool has_second_derivative() const { return static_cast<bool>(D2f); }

  Vec rhs(double t, const Vec& x) const { return A(t) * x + f(t, x); }
};

struct ProbeOptions {
  std::vector<double> t_probes{-2.5, -1.0, 0.0, 0.7, 2.0};
  double box_halfwidth = 1.6;
  double fd_step = 1e-6;
  double rel_tol = 1e-4;
};

// Finite-difference self-consistency of Df (against f) and D2f (against Df),
// plus the origin check when vanishes_at_origin is set. Throws
// ValidationError on the first violated probe.
void validate_system(const SystemDef& sys, const ProbeOptions& opts = {});

}  // namespace palmer
