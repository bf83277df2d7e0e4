#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "palmer/errors.hpp"
#include "palmer/linalg.hpp"
#include "palmer/system.hpp"

namespace palmer {

struct IntegratorConfig {
  double rtol = 1e-9;
  double atol = 1e-12;
  double max_step = 1.0;
  long max_steps = 2000000;

  IntegratorConfig tightened(double r, double a) const {
    IntegratorConfig c = *this;
    if (r < c.rtol) c.rtol = r;
    if (a < c.atol) c.atol = a;
    return c;
  }
};

struct IntegrationStats {
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

using RhsFn = std::function<void(double t, const Vec& y, Vec& dydt)>;

// Piecewise-quartic dense solution of one IVP. Backward problems are solved
// on the reversed time axis; evaluation always takes the caller's time.
class OdeSolution {
 public:
  Vec at(double t) const;
  double t_start() const { return reversed_ ? -it0_ : it0_; }
  double t_end() const { return reversed_ ? -it1_ : it1_; }
  double span_lo() const { return reversed_ ? -it1_ : it0_; }
  double span_hi() const { return reversed_ ? -it0_ : it1_; }
  const Vec& final_state() const { return y_end_; }
  const IntegrationStats& stats() const { return stats_; }
  int dim() const { return static_cast<int>(y0_.size()); }
  bool reversed() const { return reversed_; }
  std::size_t segment_count() const { return seg_t_.size(); }

 private:
  friend class AdaptiveRun;
  bool reversed_ = false;
  double it0_ = 0, it1_ = 0;  // internal (ascending) bounds
  std::vector<double> seg_t_, seg_h_;
  std::vector<Vec> seg_y_;
  std::vector<Mat> seg_coef_;  // n x 4, step size folded in
  Vec y0_, y_end_;
  IntegrationStats stats_;
};

// Embedded Dormand-Prince 5(4) stepper with a free quartic interpolant.
// Works on an ascending internal clock; `reversed` only affects how times
// are reported back to the caller.
class AdaptiveRun {
 public:
  AdaptiveRun(RhsFn rhs, double t0, Vec y0, IntegratorConfig cfg, bool reversed = false);

  void advance_to(double t_target);  // internal time, must not decrease
  double t() const { return t_; }
  const Vec& y() const { return y_; }
  const IntegrationStats& stats() const { return stats_; }
  OdeSolution finish();

 private:
  void select_initial_step(double t_bound);
  void eval_rhs(double t, const Vec& y, Vec& out);
  double external(double t) const { return reversed_ ? -t : t; }

  RhsFn rhs_;
  IntegratorConfig cfg_;
  bool reversed_ = false;
  double t0_;
  double t_;
  Vec y_, f_;  // first-same-as-last derivative at (t_, y_)
  double h_ = 0;
  bool have_f_ = false;
  IntegrationStats stats_;
  std::vector<double> seg_t_, seg_h_;
  std::vector<Vec> seg_y_;
  std::vector<Mat> seg_coef_;
  Vec y0_;
};

OdeSolution solve_ivp(const RhsFn& rhs, double t0, const Vec& y0, double t1,
                      const IntegratorConfig& cfg = {});

// Solution of x' = A(t) x + f(t, x) through (t0, xi), evaluable on the
// closed interval between t0 and t1.
struct Trajectory {
  double t0 = 0;
  Vec xi;
  OdeSolution sol;

  double span_lo() const { return sol.span_lo(); }
  double span_hi() const { return sol.span_hi(); }
  const IntegrationStats& stats() const { return sol.stats(); }
  const Vec& final_state() const { return sol.final_state(); }
};

Trajectory integrate_flow(const SystemDef& sys, double t0, const Vec& xi, double t1,
                          const IntegratorConfig& cfg = {});

Vec eval_dense(const Trajectory& traj, double t);

// Transition matrix of the linear part, computed by integrating the matrix
// equation from s to t in whichever direction is needed (never by inversion).
Mat transition_matrix(const SystemDef& sys, double t, double s, const IntegratorConfig& cfg = {});

}  // namespace palmer
