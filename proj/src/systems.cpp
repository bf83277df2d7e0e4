#include "palmer/systems.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "palmer/hypotheses.hpp"
#include "palmer/ode_engine.hpp"

namespace palmer {

namespace {

double bump(double t, double c) { return c * std::exp(-t * t); }

SystemDef example4_base(double a, double c) {
  SystemDef sys;
  sys.n = 1;
  sys.A = [a](double) { return Mat::Constant(1, 1, -a); };
  sys.f = [c](double t, const Vec& x) { return Vec::Constant(1, bump(t, c) * std::atan(x[0])); };
  sys.Df = [c](double t, const Vec& x) {
    return Mat::Constant(1, 1, bump(t, c) / (1.0 + x[0] * x[0]));
  };
  sys.D2f = [c](double t, const Vec& x) {
    double d = 1.0 + x[0] * x[0];
    return Tensor3{Mat::Constant(1, 1, -2.0 * bump(t, c) * x[0] / (d * d))};
  };
  sys.vanishes_at_origin = true;
  return sys;
}

// Composite Simpson over a dense trajectory; the reference quadrature for
// the closed forms below, deliberately not the production co-integration.
double simpson_df_integral(const SystemDef& sys, double s, double t, const Vec& x_t,
                           double target_h) {
  if (s == t) return 0.0;
  IntegratorConfig tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-14;
  Trajectory traj = integrate_flow(sys, t, x_t, s, tight);
  long m = std::max<long>(4, static_cast<long>(std::ceil(std::abs(t - s) / target_h)));
  if (m % 2) ++m;
  double h = (t - s) / static_cast<double>(m);
  double acc = 0;
  for (long k = 0; k <= m; ++k) {
    double u = s + h * static_cast<double>(k);
    double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * sys.Df(u, eval_dense(traj, u))(0, 0);
  }
  return acc * h / 3.0;
}

}  // namespace

SystemDef example4(double a, double c) {
  if (!(a > 0)) throw ValidationError("example4: decay rate a must be positive");
  if (!(c >= 0)) throw ValidationError("example4: perturbation size c must be nonnegative");
  if (4 * c > a) {
    std::ostringstream os;
    os << "example4: 4c <= a required (got a=" << a << ", c=" << c << ")";
    throw ValidationError(os.str());
  }
  SystemDef sys = example4_base(a, c);
  std::ostringstream nm;
  nm << "example4(a=" << a << ",c=" << c << ")";
  sys.name = nm.str();
  sys.oracle.transition = [a](double t, double s) {
    return Mat::Constant(1, 1, std::exp(-a * (t - s)));
  };
  sys.oracle.jacobian_flow = [a, c](double s, double t, const Vec& x_t) {
    SystemDef base = example4_base(a, c);
    return Mat::Constant(1, 1, std::exp(-simpson_df_integral(base, s, t, x_t, 1e-3)));
  };
  sys.oracle.flow_jacobian = [a, c](double s, double t, const Vec& x_t) {
    SystemDef base = example4_base(a, c);
    return Mat::Constant(1, 1,
                         std::exp(a * (t - s) - simpson_df_integral(base, s, t, x_t, 1e-3)));
  };
  sys.oracle.conjugacy_jacobian = [a, c](double t, const Vec& x) {
    SystemDef base = example4_base(a, c);
    double lo = std::min(t, 0.0) - 9.0;  // the Gaussian factor is dead past here
    return Mat::Constant(1, 1, std::exp(-simpson_df_integral(base, lo, t, x, 1e-3)));
  };
  validate_system(sys);
  return sys;
}

SystemDef linear_diag(const std::vector<double>& diag) {
  if (diag.empty()) throw ValidationError("linear_diag: need at least one rate");
  const int n = static_cast<int>(diag.size());
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = diag[static_cast<std::size_t>(i)];
  SystemDef sys;
  sys.n = n;
  sys.A = [d](double) { return Mat(d.asDiagonal()); };
  sys.f = [n](double, const Vec&) { return Vec::Zero(n); };
  sys.Df = [n](double, const Vec&) { return Mat::Zero(n, n); };
  sys.D2f = [n](double, const Vec&) { return Tensor3(static_cast<std::size_t>(n), Mat::Zero(n, n)); };
  sys.vanishes_at_origin = true;
  std::ostringstream nm;
  nm << "linear_diag(";
  for (int i = 0; i < n; ++i) nm << (i ? "," : "") << d[i];
  nm << ")";
  sys.name = nm.str();
  sys.oracle.transition = [d, n](double t, double s) {
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = std::exp(d[i] * (t - s));
    return m;
  };
  sys.oracle.jacobian_flow = [n](double, double, const Vec&) { return Mat::Identity(n, n); };
  sys.oracle.flow_jacobian = [d, n](double s, double t, const Vec&) {
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = std::exp(d[i] * (s - t));
    return m;
  };
  sys.oracle.conjugacy_jacobian = [n](double, const Vec&) { return Mat::Identity(n, n); };
  validate_system(sys);
  return sys;
}

SystemDef corollary_example(double a, double c) {
  if (!(a > 0)) throw ValidationError("corollary_example: decay rate a must be positive");
  if (!(c >= 0)) throw ValidationError("corollary_example: perturbation size c must be nonnegative");
  double k_split = std::exp(c * std::sqrt(std::numbers::pi));
  if (4 * c * k_split > a) {
    std::ostringstream os;
    os << "corollary_example: 4 c exp(c sqrt(pi)) <= a required (got a=" << a << ", c=" << c
       << ")";
    throw ValidationError(os.str());
  }
  GSystem gsys;
  gsys.n = 1;
  gsys.g = [a, c](double t, const Vec& x) {
    return Vec::Constant(1, -a * x[0] + bump(t, c) * std::atan(x[0]));
  };
  gsys.Dg = [a, c](double t, const Vec& x) {
    return Mat::Constant(1, 1, -a + bump(t, c) / (1.0 + x[0] * x[0]));
  };
  gsys.D2g = [c](double t, const Vec& x) {
    double d = 1.0 + x[0] * x[0];
    return Tensor3{Mat::Constant(1, 1, -2.0 * bump(t, c) * x[0] / (d * d))};
  };
  std::ostringstream nm;
  nm << "corollary_example(a=" << a << ",c=" << c << ")";
  gsys.name = nm.str();
  return corollary_split(gsys);
}

SystemDef arctan_cross(double a1, double a2, double c) {
  if (!(a1 > 0) || !(a2 > 0)) throw ValidationError("arctan_cross: rates must be positive");
  double amin = std::min(a1, a2);
  if (!(c >= 0) || 4 * c > amin) {
    throw ValidationError("arctan_cross: 4c <= min(a1, a2) required");
  }
  SystemDef sys;
  sys.n = 2;
  sys.A = [a1, a2](double) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = -a1;
    m(1, 1) = -a2;
    return m;
  };
  sys.f = [c](double t, const Vec& x) {
    double h = bump(t, c);
    Vec v(2);
    v[0] = h * std::atan(x[1]);
    v[1] = h * std::atan(x[0]);
    return v;
  };
  sys.Df = [c](double t, const Vec& x) {
    double h = bump(t, c);
    Mat m = Mat::Zero(2, 2);
    m(0, 1) = h / (1.0 + x[1] * x[1]);
    m(1, 0) = h / (1.0 + x[0] * x[0]);
    return m;
  };
  sys.D2f = [c](double t, const Vec& x) {
    double h = bump(t, c);
    Tensor3 out(2, Mat::Zero(2, 2));
    double d1 = 1.0 + x[1] * x[1];
    double d0 = 1.0 + x[0] * x[0];
    out[0](1, 1) = -2.0 * h * x[1] / (d1 * d1);
    out[1](0, 0) = -2.0 * h * x[0] / (d0 * d0);
    return out;
  };
  sys.vanishes_at_origin = true;
  std::ostringstream nm;
  nm << "arctan_cross(a1=" << a1 << ",a2=" << a2 << ",c=" << c << ")";
  sys.name = nm.str();
  sys.oracle.transition = [a1, a2](double t, double s) {
    Mat m = Mat::Zero(2, 2);
    m(0, 0) = std::exp(-a1 * (t - s));
    m(1, 1) = std::exp(-a2 * (t - s));
    return m;
  };
  validate_system(sys);
  return sys;
}

}  // namespace palmer
