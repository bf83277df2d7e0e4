#pragma once

#include <optional>
#include <vector>

#include "palmer/ode_engine.hpp"

namespace palmer {

// Flow plus its Jacobian with respect to the initial condition, obtained from
// the augmented system [x; vec(Y)], Y' = {A(t) + Df(t, x)} Y, Y(t0) = I.
struct VariationResult {
  int n = 0;
  Trajectory aug;

  Vec state(double s) const;
  Mat dphi(double s) const;
};

VariationResult first_variation(const SystemDef& sys, double t0, const Vec& xi, double s_end,
                                const IntegratorConfig& cfg = {});

// Adds the mixed second derivative w(s) = d2 phi(s,t0,xi) / dxi_j dxi_i,
// driven by w' = {A + Df} w + D2f[col_j(Y), col_i(Y)], w(t0) = 0.
struct SecondVariationResult {
  int n = 0;
  int i = 0, j = 0;
  Trajectory aug;  // [x; vec(Y); w]

  Vec state(double s) const;
  Mat dphi(double s) const;
  Vec d2phi(double s) const;
};

SecondVariationResult second_variation(const SystemDef& sys, double t0, const Vec& xi,
                                       double s_end, int i, int j,
                                       const IntegratorConfig& cfg = {});

// F(r, x(t)) = Psi(t,r) Df(r, phi(r,0,xi)) Psi(r,t), assembled from its three
// factors by direct integration. Diagnostic-grade; the production path
// co-integrates the same product inside solve_jacobian_flow.
Mat transported_jacobian(const SystemDef& sys, double t, double r, const Vec& xi,
                         const IntegratorConfig& cfg = {});

struct JacobianFlowOptions {
  double tail_tol = 1e-8;
  double window = 5.0;
  double s_min_cap = -200.0;
  bool stop_after_convergence = false;
};

// Backward run of the candidate-Jacobian flow dZ/ds = F(s, x(t)) Z, Z(t) = I,
// co-integrating Psi(s,t), Psi(t,s), the trajectory, and the running
// integrals of |F| and |Df| used by the tail criteria.
class ZResult {
 public:
  double t = 0;
  Vec x_t;
  int n = 0;
  Trajectory aug;  // [x; vec(Psi(s,t)); vec(Psi(t,s)); vec(Z); intF; intDf]
  std::optional<Mat> converged_limit;
  double converged_at = std::numeric_limits<double>::quiet_NaN();
  double tail_estimate = std::numeric_limits<double>::infinity();
  // Window checkpoints: {s, delta intF, delta |Z| gap, delta intDf}.
  std::vector<std::array<double, 4>> window_log;

  bool converged() const { return converged_limit.has_value(); }
  double s_reached() const { return aug.span_lo(); }
  Vec state(double s) const;
  Mat psi_from_t(double s) const;  // Psi(s,t)
  Mat psi_to_t(double s) const;    // Psi(t,s)
  Mat Z(double s) const;
  double F_integral(double s) const;   // int_s^t |F|
  double Df_integral(double s) const;  // int_s^t |Df(r, x(r))|
};

// Anchored at the point x(t) = phi(t, 0, xi).
ZResult solve_jacobian_flow(const SystemDef& sys, double t, const Vec& xi, double s_stop,
                            const IntegratorConfig& cfg = {}, const JacobianFlowOptions& opts = {});

// Same run, but anchored directly at a state x at time t.
ZResult jacobian_flow_from_state(const SystemDef& sys, double t, const Vec& x_t, double s_stop,
                                 const IntegratorConfig& cfg = {},
                                 const JacobianFlowOptions& opts = {});

}  // namespace palmer
