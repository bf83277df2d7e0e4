#include "palmer/system.hpp"

#include <cmath>
#include <sstream>

namespace palmer {

namespace {

std::vector<Vec> probe_points(int n, double hw) {
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(n));
  for (int i = 0; i < n; ++i) {
    Vec p = Vec::Zero(n);
    p[i] = 0.9 * hw;
    pts.push_back(p);
    p[i] = -0.55 * hw;
    pts.push_back(p);
  }
  Vec q = Vec::Constant(n, 0.4 * hw);
  pts.push_back(q);
  if (n > 1) {
    Vec r = Vec::Constant(n, -0.7 * hw);
    r[0] = 0.8 * hw;
    pts.push_back(r);
  }
  return pts;
}

double rel_gap(double got, double want) {
  return std::abs(got - want) / std::max({1.0, std::abs(got), std::abs(want)});
}

}  // namespace

void validate_system(const SystemDef& sys, const ProbeOptions& opts) {
  if (sys.n <= 0) throw ValidationError("system dimension must be positive");
  if (!sys.A || !sys.f || !sys.Df) throw ValidationError("system requires A, f and Df callbacks");
  const int n = sys.n;
  const double eps = opts.fd_step;
  for (double t : opts.t_probes) {
    Mat a = sys.A(t);
    if (a.rows() != n || a.cols() != n) throw ValidationError("A(t) has wrong shape");
    if (!a.allFinite()) throw ValidationError("A(t) not finite at a probe");
    if (sys.vanishes_at_origin) {
      Vec f0 = sys.f(t, Vec::Zero(n));
      if (inf_norm(f0) > 1e-12) {
        std::ostringstream os;
        os << "f(t,0) != 0 at t=" << t << " (|f| = " << inf_norm(f0)
           << ") but the origin flag is set";
        throw ValidationError(os.str());
      }
    }
    for (const Vec& x : probe_points(n, opts.box_halfwidth)) {
      Mat jac = sys.Df(t, x);
      if (jac.rows() != n || jac.cols() != n) throw ValidationError("Df has wrong shape");
      Mat fd(n, n);
      for (int j = 0; j < n; ++j) {
        Vec xp = x, xm = x;
        xp[j] += eps;
        xm[j] -= eps;
        fd.col(j) = (sys.f(t, xp) - sys.f(t, xm)) / (2 * eps);
      }
      double gap = inf_norm(Mat(jac - fd)) / std::max(1.0, inf_norm(jac));
      if (gap > opts.rel_tol) {
        std::ostringstream os;
        os << "Df disagrees with finite differences of f at t=" << t << " (gap " << gap << ")";
        throw ValidationError(os.str());
      }
      if (sys.has_second_derivative()) {
        Tensor3 hess = sys.D2f(t, x);
        if (static_cast<int>(hess.size()) != n) throw ValidationError("D2f has wrong arity");
        for (int k = 0; k < n; ++k) {
          Vec xp = x, xm = x;
          xp[k] += eps;
          xm[k] -= eps;
          Mat dcol = (sys.Df(t, xp) - sys.Df(t, xm)) / (2 * eps);  // d(Df)/dx_k
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              if (rel_gap(hess[i](j, k), dcol(i, j)) > opts.rel_tol) {
                std::ostringstream os;
                os << "D2f[" << i << "](" << j << "," << k
                   << ") disagrees with finite differences of Df at t=" << t;
                throw ValidationError(os.str());
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace palmer
