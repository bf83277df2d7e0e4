#include "palmer/variational.hpp"

#include <cmath>
#include <sstream>

namespace palmer {

namespace {

// term_i = sum_{j,k} D2f[i](j,k) u_j v_k
Vec bilinear_apply(const Tensor3& hess, const Vec& u, const Vec& v) {
  Vec out(static_cast<Eigen::Index>(hess.size()));
  for (std::size_t i = 0; i < hess.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = u.dot(hess[i] * v);
  }
  return out;
}

}  // namespace

Vec VariationResult::state(double s) const { return eval_dense(aug, s).head(n); }

Mat VariationResult::dphi(double s) const {
  Vec y = eval_dense(aug, s);
  return unvec(y.segment(n, n * n), n, n);
}

VariationResult first_variation(const SystemDef& sys, double t0, const Vec& xi, double s_end,
                                const IntegratorConfig& cfg) {
  const int n = sys.n;
  if (xi.size() != n) throw ValidationError("first_variation: state dimension mismatch");
  RhsFn rhs = [&sys, n](double t, const Vec& y, Vec& dy) {
    Vec x = y.head(n);
    Mat Y = unvec(y.segment(n, n * n), n, n);
    Mat J = sys.A(t) + sys.Df(t, x);
    dy.resize(y.size());
    dy.head(n) = sys.A(t) * x + sys.f(t, x);
    Mat dY = J * Y;
    vec_into(dY, dy.segment(n, n * n));
  };
  Vec y0(n + n * n);
  y0.head(n) = xi;
  vec_into(Mat::Identity(n, n), y0.segment(n, n * n));
  VariationResult out;
  out.n = n;
  out.aug.t0 = t0;
  out.aug.xi = y0;
  out.aug.sol = solve_ivp(rhs, t0, y0, s_end, cfg);
  return out;
}

Vec SecondVariationResult::state(double s) const { return eval_dense(aug, s).head(n); }

Mat SecondVariationResult::dphi(double s) const {
  Vec y = eval_dense(aug, s);
  return unvec(y.segment(n, n * n), n, n);
}

Vec SecondVariationResult::d2phi(double s) const {
  Vec y = eval_dense(aug, s);
  return y.segment(n + n * n, n);
}

SecondVariationResult second_variation(const SystemDef& sys, double t0, const Vec& xi,
                                       double s_end, int i, int j, const IntegratorConfig& cfg) {
  const int n = sys.n;
  if (xi.size() != n) throw ValidationError("second_variation: state dimension mismatch");
  if (i < 0 || i >= n || j < 0 || j >= n) throw ValidationError("second_variation: bad index pair");
  if (!sys.has_second_derivative()) {
    throw CapabilityError("second_variation requires a D2f callback");
  }
  RhsFn rhs = [&sys, n, i, j](double t, const Vec& y, Vec& dy) {
    Vec x = y.head(n);
    Mat Y = unvec(y.segment(n, n * n), n, n);
    Vec w = y.segment(n + n * n, n);
    Mat J = sys.A(t) + sys.Df(t, x);
    dy.resize(y.size());
    dy.head(n) = sys.A(t) * x + sys.f(t, x);
    Mat dY = J * Y;
    vec_into(dY, dy.segment(n, n * n));
    dy.segment(n + n * n, n) = J * w + bilinear_apply(sys.D2f(t, x), Y.col(j), Y.col(i));
  };
  Vec y0(n + n * n + n);
  y0.head(n) = xi;
  vec_into(Mat::Identity(n, n), y0.segment(n, n * n));
  y0.segment(n + n * n, n).setZero();
  SecondVariationResult out;
  out.n = n;
  out.i = i;
  out.j = j;
  out.aug.t0 = t0;
  out.aug.xi = y0;
  out.aug.sol = solve_ivp(rhs, t0, y0, s_end, cfg);
  return out;
}

Mat transported_jacobian(const SystemDef& sys, double t, double r, const Vec& xi,
                         const IntegratorConfig& cfg) {
  Trajectory traj = integrate_flow(sys, 0.0, xi, r, cfg);
  Vec x_r = (r == 0.0) ? xi : traj.final_state();
  Mat left = transition_matrix(sys, t, r, cfg);
  Mat right = transition_matrix(sys, r, t, cfg);
  return left * sys.Df(r, x_r) * right;
}

namespace {

// Layout of the backward run state.
struct ZLayout {
  int n;
  int off_p() const { return n; }
  int off_q() const { return n + n * n; }
  int off_z() const { return n + 2 * n * n; }
  int off_a() const { return n + 3 * n * n; }
  int off_c() const { return n + 3 * n * n + 1; }
  int size() const { return n + 3 * n * n + 2; }
};

}  // namespace

Vec ZResult::state(double s) const { return eval_dense(aug, s).head(n); }

Mat ZResult::psi_from_t(double s) const {
  Vec y = eval_dense(aug, s);
  return unvec(y.segment(n, n * n), n, n);
}

Mat ZResult::psi_to_t(double s) const {
  Vec y = eval_dense(aug, s);
  return unvec(y.segment(n + n * n, n * n), n, n);
}

Mat ZResult::Z(double s) const {
  Vec y = eval_dense(aug, s);
  return unvec(y.segment(n + 2 * n * n, n * n), n, n);
}

double ZResult::F_integral(double s) const {
  Vec y = eval_dense(aug, s);
  return y[n + 3 * n * n];
}

double ZResult::Df_integral(double s) const {
  Vec y = eval_dense(aug, s);
  return y[n + 3 * n * n + 1];
}

ZResult jacobian_flow_from_state(const SystemDef& sys, double t, const Vec& x_t, double s_stop,
                                 const IntegratorConfig& cfg, const JacobianFlowOptions& opts) {
  const int n = sys.n;
  if (x_t.size() != n) throw ValidationError("jacobian flow: state dimension mismatch");
  if (!(s_stop < t)) throw ValidationError("jacobian flow: s_stop must lie below t");
  if (!(opts.window > 0) || !(opts.tail_tol > 0)) {
    throw ValidationError("jacobian flow: window and tail_tol must be positive");
  }
  ZLayout lay{n};

  // Internal clock tau = -s, ascending from -t.
  RhsFn rhs = [&sys, lay, n](double tau, const Vec& y, Vec& dy) {
    double s = -tau;
    Vec x = y.head(n);
    Mat P = unvec(y.segment(lay.off_p(), n * n), n, n);
    Mat Q = unvec(y.segment(lay.off_q(), n * n), n, n);
    Mat Z = unvec(y.segment(lay.off_z(), n * n), n, n);
    Mat A = sys.A(s);
    Mat Dfx = sys.Df(s, x);
    Mat F = Q * Dfx * P;
    dy.resize(y.size());
    dy.head(n) = -(A * x + sys.f(s, x));
    Mat dP = -(A * P);
    vec_into(dP, dy.segment(lay.off_p(), n * n));
    Mat dQ = Q * A;
    vec_into(dQ, dy.segment(lay.off_q(), n * n));
    Mat dZ = -(F * Z);
    vec_into(dZ, dy.segment(lay.off_z(), n * n));
    dy[lay.off_a()] = inf_norm(F);
    dy[lay.off_c()] = inf_norm(Dfx);
  };

  Vec y0(lay.size());
  y0.head(n) = x_t;
  Mat eye = Mat::Identity(n, n);
  vec_into(eye, y0.segment(lay.off_p(), n * n));
  vec_into(eye, y0.segment(lay.off_q(), n * n));
  vec_into(eye, y0.segment(lay.off_z(), n * n));
  y0[lay.off_a()] = 0.0;
  y0[lay.off_c()] = 0.0;

  ZResult out;
  out.t = t;
  out.x_t = x_t;
  out.n = n;

  AdaptiveRun run(rhs, -t, y0, cfg, true);
  double prev_a = 0.0, prev_c = 0.0;
  Mat prev_z = eye;
  bool converged = false;
  double tau_stop = -s_stop;
  double tau = -t;
  while (tau < tau_stop) {
    double tau_next = std::min(tau + opts.window, tau_stop);
    run.advance_to(tau_next);
    tau = tau_next;
    const Vec& y = run.y();
    double a_now = y[lay.off_a()];
    double c_now = y[lay.off_c()];
    Mat z_now = unvec(y.segment(lay.off_z(), n * n), n, n);
    double d_a = a_now - prev_a;
    double d_c = c_now - prev_c;
    double d_z = inf_norm(Mat(z_now - prev_z));
    out.window_log.push_back({-tau, d_a, d_z, d_c});
    bool ok = d_a < opts.tail_tol && d_z < opts.tail_tol * std::exp(a_now);
    if (ok && !converged) {
      converged = true;
      out.converged_at = -tau;
    }
    if (ok) {
      out.converged_limit = z_now;
      out.tail_estimate = d_z + d_a * std::exp(a_now) * std::max(1.0, inf_norm(z_now));
    }
    prev_a = a_now;
    prev_c = c_now;
    prev_z = z_now;
    if (converged && opts.stop_after_convergence) break;
  }
  out.aug.t0 = t;
  out.aug.xi = y0;
  out.aug.sol = run.finish();
  return out;
}

ZResult solve_jacobian_flow(const SystemDef& sys, double t, const Vec& xi, double s_stop,
                            const IntegratorConfig& cfg, const JacobianFlowOptions& opts) {
  Vec x_t = xi;
  if (t != 0.0) {
    Trajectory traj = integrate_flow(sys, 0.0, xi, t, cfg);
    x_t = traj.final_state();
  }
  return jacobian_flow_from_state(sys, t, x_t, s_stop, cfg, opts);
}

}  // namespace palmer
