#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "palmer/conjugacy.hpp"
#include "palmer/ode_engine.hpp"

namespace palmer {

struct GridSpec {
  std::array<double, 2> t_range{-3.0, 3.0};
  int t_count = 21;
  std::vector<std::array<double, 2>> x_box;  // one [lo, hi] per coordinate
  int x_count_per_dim = 9;
  std::vector<Vec> xi_probes;

  void validate(int n) const;
  std::vector<double> t_values() const;
  std::vector<Vec> x_values() const;  // full tensor grid over x_box
};

struct DichotomyFitOptions {
  double k_cap = 1e3;
  int ladder_size = 400;
  int validation_factor = 10;
  bool validate = true;
};

struct DichotomyFit {
  double K = 1;
  double alpha = 1;
  bool validated = false;
  double max_violation = 0;  // worst log-scale violation on the validation grid
  int sample_count = 0;
  double mean_slack = 0;
};

// Samples |Psi(t,s)| over grid pairs t >= s and fits the uniform bound
// |Psi(t,s)| <= K e^{-alpha (t-s)}. Candidate alphas come from a descending
// ladder; for each, K is the smallest constant covering all samples (capped
// at k_cap). Among admissible pairs the fit keeps the one with the least
// mean log-slack, which is the tightest uniform envelope rather than the
// steepest admissible one. Throws StabilityError when norms do not decay.
DichotomyFit estimate_dichotomy(const SystemDef& sys, const GridSpec& grid,
                                const IntegratorConfig& cfg = {},
                                const DichotomyFitOptions& opts = {});

struct FBounds {
  double mu = 0;     // grid sup of |f|
  double gamma = 0;  // grid sup of the induced norm of Df
};

// Grid maxima; honest lower bounds for the true suprema.
FBounds estimate_f_bounds(const SystemDef& sys, const GridSpec& grid);

struct H4Check {
  bool pass = false;
  double margin = 0;  // alpha/(4K) - gamma
};

H4Check check_h4(double K, double alpha, double gamma);

struct D1Result {
  double value = 0;  // int_{s_reached}^{t} |Psi(t,r) Df(r,phi) Psi(r,t)| dr
  double tail = 0;   // sandwich estimate K^2 * remaining int |Df|
  bool certified = false;
  bool pass = false;
  double s_reached = 0;
};

D1Result check_d1(const SystemDef& sys, double t, const Vec& xi, double K,
                  const TruncationConfig& trunc = {}, const IntegratorConfig& cfg = {});

struct D2Result {
  std::vector<double> s_values;
  std::vector<double> trace_lin;    // -int_s^t tr A
  std::vector<double> trace_total;  // -int_s^t tr{A + Df(r, phi)}
  double min_lin = 0, min_total = 0;
  double slope_lin = 0, slope_total = 0;  // over the deep half of the ladder
  bool pass = false;
};

// Ladder defaults to s = t - 2^k, k = 0..7. Passes when both running minima
// stop decreasing over the deep half of the ladder.
D2Result check_d2(const SystemDef& sys, double t, const Vec& xi,
                  const std::vector<double>& s_samples = {}, const IntegratorConfig& cfg = {});

struct D3Result {
  std::vector<double> s_values;
  std::vector<Vec> route_fd;   // central difference of the Z flow in x_j(t)
  std::vector<Vec> route_var;  // Psi(t,s) d2 phi(s,t,x)/dx_j dx_i
  double max_disagreement = 0;
  double last_gap_fd = 0, last_gap_var = 0;
  bool cauchy_fd = false, cauchy_var = false;
  bool pass = false;
};

// Dual-route differentiability probe. Ladder defaults to s = t - 2^k,
// k = 0..5. Pass requires both routes Cauchy at the deep end (last two gaps
// below 1e-6) and pointwise agreement within 1e-4.
D3Result check_d3(const SystemDef& sys, double t, const Vec& xi, int i, int j,
                  const std::vector<double>& s_ladder = {}, const IntegratorConfig& cfg = {});

struct GronwallResult {
  std::vector<double> t_values;
  std::vector<double> lhs;  // |phi(t, t0, xi)|
  std::vector<double> rhs;  // K e^{(-alpha + K gamma)(t - t0)} |xi|
  double min_margin = 0;
  bool pass = false;
};

// Decay bound for the perturbed flow from (0, xi) under the vanishing
// perturbation assumption, checked pointwise on t_grid (t >= 0).
GronwallResult check_gronwall(const SystemDef& sys, const Vec& xi, const std::vector<double>& t_grid,
                              double K, double alpha, double gamma,
                              const IntegratorConfig& cfg = {});

// Vector field entered as g alone; the split A(t) = Dg(t,0),
// f(t,x) = g(t,x) - Dg(t,0) x feeds the standard suite.
struct GSystem {
  int n = 0;
  std::function<Vec(double, const Vec&)> g;
  std::function<Mat(double, const Vec&)> Dg;
  std::function<Tensor3(double, const Vec&)> D2g;  // optional
  std::string name;
};

SystemDef corollary_split(const GSystem& gsys);

struct Overrides {
  std::optional<double> K, alpha, mu, gamma;
};

struct D1Entry {
  double t = 0;
  Vec xi;
  D1Result result;
};
struct D2Entry {
  double t = 0;
  Vec xi;
  D2Result result;
};
struct D3Entry {
  double t = 0;
  Vec xi;
  int i = 0, j = 0;
  D3Result result;
};

struct HypothesisReport {
  std::string system_name;
  DichotomyFit dichotomy;
  bool dichotomy_ok = false;
  double K = 0, alpha = 0;  // effective values after overrides
  double mu = 0, gamma = 0;
  H4Check h4;
  bool h5_flagged = false, h5_ok = true;
  double h5_max_violation = 0;
  std::vector<D1Entry> d1;
  std::vector<D2Entry> d2;
  std::vector<D3Entry> d3;
  std::optional<GronwallResult> gronwall;
  std::vector<std::string> notes;
  bool all_pass = false;
  bool any_uncertified = false;
};

// The full (H)/(D) battery on one system over one grid. Estimates feed the
// dependent checks; overrides replace individual estimates when set.
HypothesisReport run_hypothesis_suite(const SystemDef& sys, const GridSpec& grid,
                                      const TruncationConfig& trunc = {},
                                      const IntegratorConfig& cfg = {},
                                      const Overrides& overrides = {});

}  // namespace palmer
