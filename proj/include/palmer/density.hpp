#pragma once

#include <vector>

#include "palmer/conjugacy.hpp"
#include "palmer/hypotheses.hpp"
#include "palmer/ode_engine.hpp"

namespace palmer {

struct LyapunovQuadrature {
  Mat P;            // int_t^{t+T} Psi(s,t)^T Psi(s,t) ds
  Mat end_state;    // Psi(t+T, t)
  Mat end_defect;   // Psi(t+T,t)^T Psi(t+T,t), the finite-horizon defect
  double tail_bound = 0;  // K^2 e^{-2 alpha T} / (2 alpha)
  double horizon = 0;
};

LyapunovQuadrature lyapunov_P(const SystemDef& sys, double t, double horizon_T, double K,
                              double alpha, const IntegratorConfig& cfg = {});

// rho(t, y) = (y^T P(t) y)^{-beta}. P is recomputed per evaluation; nothing
// on a correctness path interpolates it.
class LinearDensity {
 public:
  LinearDensity() = default;
  LinearDensity(const SystemDef& sys, double K, double alpha, double beta, double horizon_T,
                IntegratorConfig cfg);

  int n() const { return n_; }
  double beta() const { return beta_; }
  double horizon() const { return horizon_; }
  double tail_bound() const { return tail_bound_; }
  LyapunovQuadrature quadrature(double t) const;
  Mat P(double t) const { return quadrature(t).P; }
  Mat A(double t) const { return A_(t); }

 private:
  int n_ = 0;
  double K_ = 1, alpha_ = 1, beta_ = 1, horizon_ = 20, tail_bound_ = 0;
  std::function<Mat(double)> A_;
  IntegratorConfig cfg_;
};

// Positivity threshold sup over the grid of lambda_max(P(t)) max(0, -tr A(t))
// with a form-scaling margin; (n+1)/2 keeps the field integrable outside a
// ball. Either requirement alone would not give both density properties.
double choose_beta(const SystemDef& sys, double K, double alpha, const GridSpec& grid,
                   double horizon_T, const IntegratorConfig& cfg = {});

LinearDensity make_linear_density(const SystemDef& sys, double K, double alpha,
                                  const GridSpec& grid, double horizon_T = -1,
                                  const IntegratorConfig& cfg = {});

double rho_linear(const LinearDensity& ld, double t, const Vec& y);

// Closed-form divergence rho (beta (|y|^2 - y^T D y)/V + tr A(t)) with D the
// exact finite-horizon defect, cross-checked against a finite-difference
// evaluation; the two must agree to 1e-5 or an InconsistencyError is thrown.
double rho_linear_divergence(const LinearDensity& ld, double t, const Vec& y);

// Linear density plus everything the pushforward through the conjugacy needs.
struct DensityPair {
  LinearDensity linear;
  DichotomyEstimate dich;
  double mu = 0;
  TruncationConfig trunc;
  IntegratorConfig cfg;
};

DensityPair make_density_pair(const SystemDef& sys, double K, double alpha, double mu,
                              const GridSpec& grid, double horizon_T = -1,
                              const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

// rho_bar(t, x) = rho(t, H(t,x)) det DH(t,x).
double rho_bar(const DensityPair& dp, const SystemDef& sys, double t, const Vec& x);

struct DivergenceCheck {
  double value = 0;        // Richardson-extrapolated finite-difference estimate
  double transported = 0;  // rho_linear_divergence at y = H(t,x) times det DH
  double rel_gap = 0;
  bool routes_agree = false;
};

// d rho_bar / dt + div_x (rho_bar g) by central differences with relative
// step fd_step, Richardson-extrapolated once, cross-checked against the
// transported linear divergence.
DivergenceCheck rho_bar_divergence_check(const DensityPair& dp, const SystemDef& sys, double t,
                                         const Vec& x, double fd_step = 1e-4);

struct IntegrabilityResult {
  std::vector<double> radii;
  std::vector<double> partials;    // integral over ball_radius <= |x| <= R_k
  std::vector<double> increments;  // shell contributions
  std::vector<double> ratios;
  double expected_ratio = 0;  // 2^{n - 2 beta}
  double tail_estimate = 0;
  double value = 0;  // last partial plus geometric tail
  bool pass = false;
};

// Shell quadratures of rho_bar(t, .) over a doubling radius ladder; passes
// when the partial integrals are Cauchy with shell ratios consistent with
// the |x|^{-2 beta} far field.
IntegrabilityResult integrability_check(const DensityPair& dp, const SystemDef& sys, double t,
                                        double ball_radius, double outer_radius);

}  // namespace palmer
