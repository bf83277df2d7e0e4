#include "palmer/conjugacy.hpp"

#include <cmath>
#include <sstream>

namespace palmer {

namespace {

// Backward co-integration state for the map itself: [x; vec(Psi(tau,s)); I].
struct HLayout {
  int n;
  int off_q() const { return n; }
  int off_i() const { return n + n * n; }
  int size() const { return 2 * n + n * n; }
};

}  // namespace

ConjugacyResult conjugacy_at(const SystemDef& sys, double tau, const Vec& nu,
                             const DichotomyEstimate& dich, double mu,
                             const TruncationConfig& trunc, const IntegratorConfig& cfg) {
  const int n = sys.n;
  if (nu.size() != n) throw ValidationError("conjugacy_at: state dimension mismatch");
  if (!(dich.K >= 1) || !(dich.alpha > 0)) {
    throw ValidationError("conjugacy_at: need K >= 1 and alpha > 0");
  }
  if (!(mu >= 0)) throw ValidationError("conjugacy_at: mu must be nonnegative");

  // Lower limit where the remaining improper tail is provably below tail_tol.
  double depth = 0.0;
  double lead = dich.K * mu / dich.alpha;
  if (lead > trunc.tail_tol) depth = std::log(lead / trunc.tail_tol) / dich.alpha;
  ConjugacyResult out;
  if (depth == 0.0) {
    out.value = nu;
    out.truncation_point = tau;
    out.tail_bound = lead;
    return out;
  }
  double s0 = tau - depth;
  bool capped = s0 < trunc.s_min_cap;
  if (capped) s0 = trunc.s_min_cap;

  HLayout lay{n};
  RhsFn rhs = [&sys, lay, n](double t_int, const Vec& y, Vec& dy) {
    double s = -t_int;
    Vec x = y.head(n);
    Mat Q = unvec(y.segment(lay.off_q(), n * n), n, n);
    Mat A = sys.A(s);
    dy.resize(y.size());
    dy.head(n) = -(A * x + sys.f(s, x));
    Mat dQ = Q * A;
    vec_into(dQ, dy.segment(lay.off_q(), n * n));
    dy.segment(lay.off_i(), n) = Q * sys.f(s, x);
  };
  Vec y0(lay.size());
  y0.head(n) = nu;
  vec_into(Mat::Identity(n, n), y0.segment(lay.off_q(), n * n));
  y0.segment(lay.off_i(), n).setZero();

  IntegratorConfig qcfg = cfg.tightened(trunc.quad_rtol, cfg.atol);
  AdaptiveRun run(rhs, -tau, y0, qcfg, true);
  run.advance_to(-s0);
  Vec integral = run.y().segment(lay.off_i(), n);
  out.value = nu - integral;
  out.truncation_point = s0;
  out.tail_bound = dich.K * mu * std::exp(-dich.alpha * (tau - s0)) / dich.alpha;
  out.quad_nodes = run.stats().steps;
  if (capped) {
    std::ostringstream os;
    os << "conjugacy_at: certified cut " << tau - depth << " lies below the floor "
       << trunc.s_min_cap << "; unresolved tail " << out.tail_bound;
    throw TruncationError(os.str(), out.value, out.truncation_point, out.tail_bound);
  }
  return out;
}

ConjugacyResult conjugacy_on_orbit(const SystemDef& sys, const Vec& xi, double t,
                                   const DichotomyEstimate& dich, double mu,
                                   const TruncationConfig& trunc, const IntegratorConfig& cfg) {
  Vec x_t = xi;
  if (t != 0.0) {
    Trajectory traj = integrate_flow(sys, 0.0, xi, t, cfg);
    x_t = traj.final_state();
  }
  return conjugacy_at(sys, t, x_t, dich, mu, trunc, cfg);
}

namespace {

JacobianFlowOptions jacobian_options(const TruncationConfig& trunc) {
  JacobianFlowOptions opts;
  opts.tail_tol = trunc.tail_tol;
  opts.s_min_cap = trunc.s_min_cap;
  opts.stop_after_convergence = true;
  return opts;
}

}  // namespace

Mat conjugacy_jacobian(const SystemDef& sys, double t, const Vec& x, const TruncationConfig& trunc,
                       const IntegratorConfig& cfg) {
  ZResult zr = jacobian_flow_from_state(sys, t, x, trunc.s_min_cap, cfg, jacobian_options(trunc));
  if (!zr.converged()) {
    std::ostringstream os;
    os << "conjugacy_jacobian: tail not stabilized by s=" << zr.s_reached()
       << " (floor " << trunc.s_min_cap << ")";
    throw ConvergenceError(os.str(), zr.window_log.empty() ? 0.0 : zr.window_log.back()[2]);
  }
  return *zr.converged_limit;
}

Vec conjugacy_hessian(const SystemDef& sys, double t, const Vec& x, int i, int j,
                      const TruncationConfig& trunc, const IntegratorConfig& cfg) {
  const int n = sys.n;
  if (x.size() != n) throw ValidationError("conjugacy_hessian: state dimension mismatch");
  if (i < 0 || i >= n || j < 0 || j >= n) throw ValidationError("conjugacy_hessian: bad indices");
  if (!sys.has_second_derivative()) {
    throw CapabilityError("conjugacy_hessian requires a D2f callback");
  }
  // Backward run of [x; vec(Y); w; vec(Q)] with Y the flow Jacobian from t,
  // w the mixed second derivative, Q = Psi(t,s); the candidate limit is Q w.
  const int off_y = n, off_w = n + n * n, off_q = 2 * n + n * n;
  const int dim = 2 * n + 2 * n * n;
  RhsFn rhs = [&sys, n, off_y, off_w, off_q, i, j](double t_int, const Vec& y, Vec& dy) {
    double s = -t_int;
    Vec x_s = y.head(n);
    Mat Y = unvec(y.segment(off_y, n * n), n, n);
    Vec w = y.segment(off_w, n);
    Mat Q = unvec(y.segment(off_q, n * n), n, n);
    Mat A = sys.A(s);
    Mat J = A + sys.Df(s, x_s);
    Tensor3 hess = sys.D2f(s, x_s);
    Vec force(n);
    for (int r = 0; r < n; ++r) force[r] = Y.col(j).dot(hess[static_cast<std::size_t>(r)] * Y.col(i));
    dy.resize(y.size());
    dy.head(n) = -(A * x_s + sys.f(s, x_s));
    Mat dY = -(J * Y);
    vec_into(dY, dy.segment(off_y, n * n));
    dy.segment(off_w, n) = -(J * w + force);
    Mat dQ = Q * A;
    vec_into(dQ, dy.segment(off_q, n * n));
  };
  Vec y0(dim);
  y0.head(n) = x;
  vec_into(Mat::Identity(n, n), y0.segment(off_y, n * n));
  y0.segment(off_w, n).setZero();
  vec_into(Mat::Identity(n, n), y0.segment(off_q, n * n));

  double window = JacobianFlowOptions{}.window;
  AdaptiveRun run(rhs, -t, y0, cfg, true);
  Vec prev = Vec::Zero(n);
  double tau = -t, tau_floor = -trunc.s_min_cap;
  while (tau < tau_floor) {
    double tau_next = std::min(tau + window, tau_floor);
    run.advance_to(tau_next);
    tau = tau_next;
    Mat Q = unvec(run.y().segment(off_q, n * n), n, n);
    Vec candidate = Q * run.y().segment(off_w, n);
    if (inf_norm(Vec(candidate - prev)) < trunc.tail_tol) return candidate;
    prev = candidate;
  }
  std::ostringstream os;
  os << "conjugacy_hessian: tail not stabilized by the floor " << trunc.s_min_cap;
  throw ConvergenceError(os.str(), inf_norm(prev));
}

Vec conjugacy_inverse(const SystemDef& sys, double tau, const Vec& y, const DichotomyEstimate& dich,
                      double mu, const TruncationConfig& trunc, const IntegratorConfig& cfg,
                      const InverseOptions& opts) {
  if (y.size() != sys.n) throw ValidationError("conjugacy_inverse: state dimension mismatch");
  auto residual = [&](const Vec& x) -> Vec {
    return conjugacy_at(sys, tau, x, dich, mu, trunc, cfg).value - y;
  };
  Vec x = y;
  Vec r = residual(x);
  double rn = inf_norm(r);
  for (int it = 0; it < opts.max_newton; ++it) {
    if (rn <= opts.residual_tol) return x;
    Mat jac = conjugacy_jacobian(sys, tau, x, trunc, cfg);
    Vec step = jac.partialPivLu().solve(r);
    bool improved = false;
    double lambda = 1.0;
    for (int cut = 0; cut < 5; ++cut) {
      Vec x_try = x - lambda * step;
      Vec r_try = residual(x_try);
      double rn_try = inf_norm(r_try);
      if (rn_try < rn) {
        x = x_try;
        r = r_try;
        rn = rn_try;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;  // hand over to the fixed-point fallback
  }
  // Fixed-point fallback x <- y - (H(x) - x), i.e. x - r; contraction when
  // H - id has small Lipschitz constant, which H4 guarantees.
  for (int it = 0; it < opts.max_fixed_point && rn > opts.residual_tol; ++it) {
    x = x - r;
    r = residual(x);
    rn = inf_norm(r);
  }
  if (rn <= opts.residual_tol) return x;
  std::ostringstream os;
  os << "conjugacy_inverse: residual " << rn << " above tolerance " << opts.residual_tol;
  throw ConvergenceError(os.str(), rn);
}

double conjugacy_defect(const SystemDef& sys, const Vec& xi, const std::vector<double>& t_grid,
                        const DichotomyEstimate& dich, double mu, const TruncationConfig& trunc,
                        const IntegratorConfig& cfg) {
  ConjugacyResult h0 = conjugacy_at(sys, 0.0, xi, dich, mu, trunc, cfg);
  double worst = 0.0;
  for (double t : t_grid) {
    ConjugacyResult ht = conjugacy_on_orbit(sys, xi, t, dich, mu, trunc, cfg);
    Vec transported = transition_matrix(sys, t, 0.0, cfg) * h0.value;
    worst = std::max(worst, inf_norm(Vec(ht.value - transported)));
  }
  return worst;
}

}  // namespace palmer
