#include "palmer/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "palmer/parallel.hpp"

namespace palmer {

namespace {

// Forward co-integration over [t, t+T] of [vec(M); vec(P)] with M = Psi(s,t),
// P' = M^T M. The integrand is symmetric at every stage, so P stays symmetric
// to roundoff; anything worse indicates a broken run.
LyapunovQuadrature lyap_quad(const std::function<Mat(double)>& A, int n, double t, double T,
                             double K, double alpha, const IntegratorConfig& cfg) {
  RhsFn rhs = [&A, n](double s, const Vec& y, Vec& dy) {
    Mat M = unvec(y.head(n * n), n, n);
    dy.resize(y.size());
    Mat dM = A(s) * M;
    vec_into(dM, dy.head(n * n));
    Mat dP = M.transpose() * M;
    vec_into(dP, dy.segment(n * n, n * n));
  };
  Vec y0 = Vec::Zero(2 * n * n);
  vec_into(Mat::Identity(n, n), y0.head(n * n));
  OdeSolution sol = solve_ivp(rhs, t, y0, t + T, cfg);

  LyapunovQuadrature out;
  Mat P = unvec(sol.final_state().segment(n * n, n * n), n, n);
  double asym = inf_norm(Mat(P - P.transpose()));
  if (asym > 1e-10 * std::max(1.0, inf_norm(P))) {
    throw InconsistencyError("lyapunov quadrature lost symmetry", asym, 0.0);
  }
  out.P = 0.5 * (P + P.transpose());
  out.end_state = unvec(sol.final_state().head(n * n), n, n);
  out.end_defect = out.end_state.transpose() * out.end_state;
  out.tail_bound = K * K * std::exp(-2.0 * alpha * T) / (2.0 * alpha);
  out.horizon = T;
  return out;
}

// Horizon making the discarded tail K^2 e^{-2 alpha T}/(2 alpha) <= 1e-15,
// floored at 5/alpha.
double auto_horizon(double K, double alpha) {
  double want = std::log(std::max(K * K / (2.0 * alpha * 1e-15), std::exp(10.0)));
  return want / (2.0 * alpha);
}

}  // namespace

LyapunovQuadrature lyapunov_P(const SystemDef& sys, double t, double horizon_T, double K,
                              double alpha, const IntegratorConfig& cfg) {
  if (!(horizon_T > 0)) throw ValidationError("lyapunov_P: horizon must be positive");
  if (!(K >= 1) || !(alpha > 0)) throw ValidationError("lyapunov_P: need K >= 1, alpha > 0");
  return lyap_quad(sys.A, sys.n, t, horizon_T, K, alpha, cfg);
}

LinearDensity::LinearDensity(const SystemDef& sys, double K, double alpha, double beta,
                             double horizon_T, IntegratorConfig cfg)
    : n_(sys.n), K_(K), alpha_(alpha), beta_(beta), horizon_(horizon_T), A_(sys.A) {
  if (!(K >= 1) || !(alpha > 0)) throw ValidationError("LinearDensity: need K >= 1, alpha > 0");
  if (!(beta > 0)) throw ValidationError("LinearDensity: beta must be positive");
  if (!(horizon_T > 0)) throw ValidationError("LinearDensity: horizon must be positive");
  // Quadratures run much tighter than the ambient tolerance: divergence
  // cross-checks divide evaluation error by a 1e-4 finite-difference step.
  cfg_ = cfg.tightened(std::min(cfg.rtol, 1e-11), std::min(cfg.atol, 1e-13));
  tail_bound_ = K * K * std::exp(-2.0 * alpha * horizon_T) / (2.0 * alpha);
  for (double t : {-3.0, 0.0, 3.0}) {
    Mat P = quadrature(t).P;
    Eigen::SelfAdjointEigenSolver<Mat> eig(P);
    if (eig.eigenvalues().minCoeff() <= 0) {
      throw StabilityError("LinearDensity: Lyapunov matrix not positive definite",
                           eig.eigenvalues().minCoeff());
    }
  }
}

LyapunovQuadrature LinearDensity::quadrature(double t) const {
  if (n_ == 0) throw ValidationError("LinearDensity: default-constructed");
  return lyap_quad(A_, n_, t, horizon_, K_, alpha_, cfg_);
}

double choose_beta(const SystemDef& sys, double K, double alpha, const GridSpec& grid,
                   double horizon_T, const IntegratorConfig& cfg) {
  grid.validate(sys.n);
  double T = horizon_T > 0 ? horizon_T : auto_horizon(K, alpha);
  IntegratorConfig qcfg = cfg.tightened(std::min(cfg.rtol, 1e-11), std::min(cfg.atol, 1e-13));
  double threshold = 0, defect_max = 0;
  for (double t : grid.t_values()) {
    LyapunovQuadrature q = lyap_quad(sys.A, sys.n, t, T, K, alpha, qcfg);
    Eigen::SelfAdjointEigenSolver<Mat> eig_p(q.P);
    Eigen::SelfAdjointEigenSolver<Mat> eig_d(q.end_defect);
    double tr = sys.A(t).trace();
    threshold = std::max(threshold, eig_p.eigenvalues().maxCoeff() * std::max(0.0, -tr));
    defect_max = std::max(defect_max, eig_d.eigenvalues().maxCoeff());
  }
  if (!std::isfinite(threshold)) throw ValidationError("choose_beta: non-finite grid sup");
  if (defect_max >= 0.5) {
    throw ValidationError("choose_beta: horizon too short, finite-horizon defect dominates");
  }
  // Positivity needs beta |y|^2 / V > -tr A pointwise; the worst y direction
  // contributes lambda_max(P). (n+1)/2 keeps rho integrable outside a ball.
  return std::max(0.5 * (sys.n + 1), 1.1 * threshold / (1.0 - defect_max));
}

LinearDensity make_linear_density(const SystemDef& sys, double K, double alpha,
                                  const GridSpec& grid, double horizon_T,
                                  const IntegratorConfig& cfg) {
  double T = horizon_T > 0 ? horizon_T : auto_horizon(K, alpha);
  double beta = choose_beta(sys, K, alpha, grid, T, cfg);
  return LinearDensity(sys, K, alpha, beta, T, cfg);
}

double rho_linear(const LinearDensity& ld, double t, const Vec& y) {
  if (y.size() != ld.n()) throw ValidationError("rho_linear: dimension mismatch");
  if (inf_norm(y) == 0) throw DomainError("rho_linear: density undefined at the origin", t, y);
  double V = y.dot(ld.P(t) * y);
  if (!(V > 0)) throw StabilityError("rho_linear: quadratic form not positive", V);
  return std::pow(V, -ld.beta());
}

double rho_linear_divergence(const LinearDensity& ld, double t, const Vec& y) {
  if (y.size() != ld.n()) throw ValidationError("rho_linear_divergence: dimension mismatch");
  if (inf_norm(y) == 0) {
    throw DomainError("rho_linear_divergence: undefined at the origin", t, y);
  }
  const double beta = ld.beta();
  LyapunovQuadrature q = ld.quadrature(t);
  Mat A = ld.A(t);
  double V = y.dot(q.P * y);
  if (!(V > 0)) throw StabilityError("rho_linear_divergence: quadratic form not positive", V);
  double rho = std::pow(V, -beta);
  double closed = rho * (beta * (y.squaredNorm() - y.dot(q.end_defect * y)) / V + A.trace());

  // Independent route: plain central differences of d rho/dt + div(rho A y).
  // The t step needs fresh quadratures; the y steps reuse P(t) exactly.
  double ht = 1e-4 * std::max(1.0, std::abs(t));
  auto rho_at_t = [&](double tt) { return std::pow(y.dot(ld.P(tt) * y), -beta); };
  double fd = (rho_at_t(t + ht) - rho_at_t(t - ht)) / (2.0 * ht);
  double hy = 1e-4 * std::max(inf_norm(y), 1e-2);
  for (int k = 0; k < ld.n(); ++k) {
    Vec yp = y, ym = y;
    yp[k] += hy;
    ym[k] -= hy;
    double fp = std::pow(yp.dot(q.P * yp), -beta) * (A * yp)[k];
    double fm = std::pow(ym.dot(q.P * ym), -beta) * (A * ym)[k];
    fd += (fp - fm) / (2.0 * hy);
  }
  double gap = std::abs(closed - fd) / std::max(1.0, std::abs(closed));
  if (gap > 1e-5) {
    throw InconsistencyError("rho_linear_divergence: closed form and finite differences disagree",
                             closed, fd);
  }
  return closed;
}

DensityPair make_density_pair(const SystemDef& sys, double K, double alpha, double mu,
                              const GridSpec& grid, double horizon_T,
                              const TruncationConfig& trunc, const IntegratorConfig& cfg) {
  DensityPair dp;
  dp.linear = make_linear_density(sys, K, alpha, grid, horizon_T, cfg);
  dp.dich = DichotomyEstimate{K, alpha};
  dp.mu = mu;
  dp.trunc = trunc;
  dp.cfg = cfg;
  return dp;
}

double rho_bar(const DensityPair& dp, const SystemDef& sys, double t, const Vec& x) {
  if (x.size() != sys.n) throw ValidationError("rho_bar: dimension mismatch");
  if (inf_norm(x) == 0) throw DomainError("rho_bar: undefined at the origin", t, x);
  Vec h = conjugacy_at(sys, t, x, dp.dich, dp.mu, dp.trunc, dp.cfg).value;
  Mat dh = conjugacy_jacobian(sys, t, x, dp.trunc, dp.cfg);
  return rho_linear(dp.linear, t, h) * dh.determinant();
}

DivergenceCheck rho_bar_divergence_check(const DensityPair& dp, const SystemDef& sys, double t,
                                         const Vec& x, double fd_step) {
  if (!(fd_step > 0)) throw ValidationError("rho_bar_divergence_check: bad step");
  if (inf_norm(x) == 0) {
    throw DomainError("rho_bar_divergence_check: undefined at the origin", t, x);
  }
  // The differences divide evaluation error by the step, so the runs under
  // them use tightened truncation and integrator tolerances.
  DensityPair tight = dp;
  tight.trunc.tail_tol = std::min(dp.trunc.tail_tol, 1e-10);
  tight.cfg = dp.cfg.tightened(std::min(dp.cfg.rtol, 1e-11), std::min(dp.cfg.atol, 1e-13));
  auto rb = [&](double tt, const Vec& xx) { return rho_bar(tight, sys, tt, xx); };

  auto richardson = [](auto&& central, double h) {
    double coarse = central(h), fine = central(0.5 * h);
    return (4.0 * fine - coarse) / 3.0;
  };

  double ht = fd_step * std::max(1.0, std::abs(t));
  double dt_part = richardson(
      [&](double h) { return (rb(t + h, x) - rb(t - h, x)) / (2.0 * h); }, ht);

  double hx = fd_step * std::max(inf_norm(x), 1e-2);
  double div_part = 0;
  for (int k = 0; k < sys.n; ++k) {
    auto flux = [&](const Vec& xx) { return rb(t, xx) * (sys.A(t) * xx + sys.f(t, xx))[k]; };
    div_part += richardson(
        [&](double h) {
          Vec xp = x, xm = x;
          xp[k] += h;
          xm[k] -= h;
          return (flux(xp) - flux(xm)) / (2.0 * h);
        },
        hx);
  }

  DivergenceCheck out;
  out.value = dt_part + div_part;
  Vec h_img = conjugacy_at(sys, t, x, tight.dich, tight.mu, tight.trunc, tight.cfg).value;
  Mat dh = conjugacy_jacobian(sys, t, x, tight.trunc, tight.cfg);
  out.transported = rho_linear_divergence(tight.linear, t, h_img) * dh.determinant();
  out.rel_gap = std::abs(out.value - out.transported) / std::max(1.0, std::abs(out.transported));
  out.routes_agree = out.rel_gap <= 1e-3;
  return out;
}

namespace {

// Composite Simpson over [a, b] of a pointwise-expensive integrand; nodes go
// into fixed slots, so the sum order is deterministic. The parallel toggle
// exists because the 2-D path already fans out over angles and must not nest.
double simpson_nodes(const std::function<double(double)>& f, double a, double b, int panels,
                     bool parallel) {
  int m = 2 * panels + 1;
  double h = (b - a) / (m - 1);
  std::vector<double> vals(static_cast<std::size_t>(m));
  auto fill = [&](std::size_t k) { vals[k] = f(a + h * static_cast<double>(k)); };
  if (parallel) {
    parallel_for(vals.size(), fill);
  } else {
    for (std::size_t k = 0; k < vals.size(); ++k) fill(k);
  }
  double sum = vals.front() + vals.back();
  for (int k = 1; k < m - 1; ++k) sum += vals[static_cast<std::size_t>(k)] * (k % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

}  // namespace

IntegrabilityResult integrability_check(const DensityPair& dp, const SystemDef& sys, double t,
                                        double ball_radius, double outer_radius) {
  if (!(ball_radius > 0) || !(outer_radius >= 8.0 * ball_radius)) {
    throw ValidationError("integrability_check: need 0 < ball_radius and outer >= 8 ball");
  }
  if (sys.n > 2) {
    throw CapabilityError("integrability_check: shell quadrature implemented for n <= 2");
  }
  IntegrabilityResult out;
  out.expected_ratio = std::pow(2.0, sys.n - 2.0 * dp.linear.beta());

  double lo = ball_radius;
  for (double hi = 2.0 * ball_radius; hi <= outer_radius * (1 + 1e-12); hi *= 2.0) {
    double shell = 0;
    if (sys.n == 1) {
      for (double sign : {-1.0, 1.0}) {
        shell += simpson_nodes(
            [&](double r) { return rho_bar(dp, sys, t, Vec::Constant(1, sign * r)); }, lo, hi, 8,
            true);
      }
    } else {
      // Polar product rule: Simpson radially, trapezoid on the periodic angle.
      const int n_theta = 24;
      std::vector<double> ang(n_theta);
      parallel_for(ang.size(), [&](std::size_t q) {
        double theta = 2.0 * std::numbers::pi * static_cast<double>(q) / n_theta;
        Vec u(2);
        u << std::cos(theta), std::sin(theta);
        ang[q] = simpson_nodes(
            [&](double r) { return r * rho_bar(dp, sys, t, Vec(r * u)); }, lo, hi, 8, false);
      });
      for (double a : ang) shell += a;
      shell *= 2.0 * std::numbers::pi / n_theta;
    }
    out.radii.push_back(hi);
    out.increments.push_back(shell);
    out.partials.push_back((out.partials.empty() ? 0.0 : out.partials.back()) + shell);
    lo = hi;
  }
  if (out.increments.size() < 3) {
    throw ValidationError("integrability_check: ladder too short");
  }
  for (std::size_t k = 1; k < out.increments.size(); ++k) {
    out.ratios.push_back(out.increments[k] / out.increments[k - 1]);
  }
  double last = out.ratios.back();
  bool positive = *std::min_element(out.increments.begin(), out.increments.end()) > 0;
  bool contracting = last < 0.9;
  bool consistent = std::abs(last - out.expected_ratio) <= 0.15;
  out.pass = positive && contracting && consistent;
  out.tail_estimate = contracting ? out.increments.back() * last / (1.0 - last)
                                  : std::numeric_limits<double>::infinity();
  out.value = out.partials.back() + (contracting ? out.tail_estimate : 0.0);
  return out;
}

}  // namespace palmer
