#include "palmer/ode_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace palmer {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9;

constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176,
                 A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;

// Difference between the 5th and 4th order weights.
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

// Quartic interpolant coefficients (stage weights for theta, theta^2, ...).
constexpr double P_TABLE[7][4] = {
    {1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0,
     -12715105075.0 / 11282082432.0},
    {0.0, 0.0, 0.0, 0.0},
    {0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0,
     87487479700.0 / 32700410799.0},
    {0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0,
     -10690763975.0 / 1880347072.0},
    {0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0,
     701980252875.0 / 199316789632.0},
    {0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0},
    {0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0}};

double scaled_rms(const Vec& err, const Vec& scale) {
  double acc = 0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    double r = err[i] / scale[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace

Vec OdeSolution::at(double t) const {
  double tau = reversed_ ? -t : t;
  double cushion = 1e-9 * (1.0 + std::abs(it0_) + std::abs(it1_));
  if (tau < it0_ - cushion || tau > it1_ + cushion) {
    std::ostringstream os;
    os << "dense evaluation at t=" << t << " outside computed span [" << span_lo() << ", "
       << span_hi() << "]";
    throw RangeError(os.str());
  }
  if (seg_t_.empty()) return y0_;
  tau = std::clamp(tau, it0_, it1_);
  auto it = std::upper_bound(seg_t_.begin(), seg_t_.end(), tau);
  std::size_t idx = (it == seg_t_.begin()) ? 0 : static_cast<std::size_t>(it - seg_t_.begin()) - 1;
  idx = std::min(idx, seg_t_.size() - 1);
  double theta = (tau - seg_t_[idx]) / seg_h_[idx];
  theta = std::clamp(theta, 0.0, 1.0);
  Eigen::Vector4d p(theta, theta * theta, theta * theta * theta, theta * theta * theta * theta);
  return seg_y_[idx] + seg_coef_[idx] * p;
}

AdaptiveRun::AdaptiveRun(RhsFn rhs, double t0, Vec y0, IntegratorConfig cfg, bool reversed)
    : rhs_(std::move(rhs)), cfg_(cfg), reversed_(reversed), t0_(t0), t_(t0), y_(std::move(y0)) {
  if (cfg_.rtol <= 0 || cfg_.atol <= 0) throw ValidationError("integrator tolerances must be positive");
  if (cfg_.max_step <= 0) throw ValidationError("max_step must be positive");
  f_.resize(y_.size());
  y0_ = y_;
}

void AdaptiveRun::eval_rhs(double t, const Vec& y, Vec& out) {
  rhs_(t, y, out);
  ++stats_.rhs_evals;
  if (!out.allFinite() || !y.allFinite()) {
    throw DomainError("non-finite derivative evaluation", external(t), y);
  }
}

void AdaptiveRun::select_initial_step(double t_bound) {
  const Eigen::Index n = y_.size();
  Vec scale(n);
  for (Eigen::Index i = 0; i < n; ++i) scale[i] = cfg_.atol + cfg_.rtol * std::abs(y_[i]);
  double d0 = scaled_rms(y_, scale);
  double d1 = scaled_rms(f_, scale);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, (t_bound - t_) * 0.5);
  h0 = std::max(h0, 1e-12);
  Vec y1 = y_ + h0 * f_;
  Vec f1(n);
  eval_rhs(t_ + h0, y1, f1);
  double d2 = scaled_rms(f1 - f_, scale) / h0;
  double h1;
  if (d1 <= 1e-15 && d2 <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  }
  h_ = std::min({100 * h0, h1, cfg_.max_step, t_bound - t_});
}

void AdaptiveRun::advance_to(double t_target) {
  if (t_target < t_) throw ValidationError("advance_to: target behind current time");
  const Eigen::Index n = y_.size();
  if (t_target == t_) return;
  if (!have_f_) {
    eval_rhs(t_, y_, f_);
    have_f_ = true;
    select_initial_step(t_target);
  }
  Vec k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n), scale(n);
  while (t_ < t_target) {
    if (stats_.steps >= cfg_.max_steps) {
      std::ostringstream os;
      os << "step budget " << cfg_.max_steps << " exhausted at t=" << external(t_);
      throw BudgetError(os.str(), external(t_));
    }
    double h = std::min({h_, cfg_.max_step, t_target - t_});
    bool accepted = false;
    while (!accepted) {
      double hmin = 1e-14 * std::max(1.0, std::abs(t_));
      if (h < hmin) {
        throw ConvergenceError("step size underflow in adaptive integrator", h);
      }
      const Vec& k1 = f_;
      ytmp = y_ + h * (A21 * k1);
      eval_rhs(t_ + C2 * h, ytmp, k2);
      ytmp = y_ + h * (A31 * k1 + A32 * k2);
      eval_rhs(t_ + C3 * h, ytmp, k3);
      ytmp = y_ + h * (A41 * k1 + A42 * k2 + A43 * k3);
      eval_rhs(t_ + C4 * h, ytmp, k4);
      ytmp = y_ + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
      eval_rhs(t_ + C5 * h, ytmp, k5);
      ytmp = y_ + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
      eval_rhs(t_ + h, ytmp, k6);
      ynew = y_ + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
      eval_rhs(t_ + h, ynew, k7);
      err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
      for (Eigen::Index i = 0; i < n; ++i) {
        scale[i] = cfg_.atol + cfg_.rtol * std::max(std::abs(y_[i]), std::abs(ynew[i]));
      }
      double en = scaled_rms(err, scale);
      if (en <= 1.0) {
        double factor = (en == 0) ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
        // Record the quartic interpolant for this step.
        Mat coef(n, 4);
        coef.setZero();
        const Vec* stages[7] = {&k1, &k2, &k3, &k4, &k5, &k6, &k7};
        for (int s = 0; s < 7; ++s) {
          for (int c = 0; c < 4; ++c) {
            if (P_TABLE[s][c] != 0.0) coef.col(c) += (h * P_TABLE[s][c]) * (*stages[s]);
          }
        }
        seg_t_.push_back(t_);
        seg_h_.push_back(h);
        seg_y_.push_back(y_);
        seg_coef_.push_back(std::move(coef));
        t_ += h;
        y_.swap(ynew);
        f_.swap(k7);
        ++stats_.steps;
        h_ = h * factor;
        accepted = true;
      } else {
        ++stats_.rejected;
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      }
    }
  }
}

OdeSolution AdaptiveRun::finish() {
  OdeSolution sol;
  sol.reversed_ = reversed_;
  sol.it0_ = t0_;
  sol.it1_ = t_;
  sol.seg_t_ = std::move(seg_t_);
  sol.seg_h_ = std::move(seg_h_);
  sol.seg_y_ = std::move(seg_y_);
  sol.seg_coef_ = std::move(seg_coef_);
  sol.y0_ = std::move(y0_);
  sol.y_end_ = y_;
  sol.stats_ = stats_;
  return sol;
}

OdeSolution solve_ivp(const RhsFn& rhs, double t0, const Vec& y0, double t1,
                      const IntegratorConfig& cfg) {
  if (y0.size() == 0) throw ValidationError("solve_ivp: empty state");
  if (t1 == t0) {
    AdaptiveRun run(rhs, t0, y0, cfg, false);
    return run.finish();
  }
  if (t1 > t0) {
    AdaptiveRun run(rhs, t0, y0, cfg, false);
    run.advance_to(t1);
    return run.finish();
  }
  // Reverse the clock once; there is exactly one stepping code path.
  RhsFn flipped = [&rhs](double tau, const Vec& y, Vec& dydt) {
    rhs(-tau, y, dydt);
    dydt = -dydt;
  };
  AdaptiveRun run(flipped, -t0, y0, cfg, true);
  run.advance_to(-t1);
  return run.finish();
}

Trajectory integrate_flow(const SystemDef& sys, double t0, const Vec& xi, double t1,
                          const IntegratorConfig& cfg) {
  if (xi.size() != sys.n) throw ValidationError("integrate_flow: state dimension mismatch");
  RhsFn rhs = [&sys](double t, const Vec& x, Vec& dx) { dx = sys.A(t) * x + sys.f(t, x); };
  Trajectory traj;
  traj.t0 = t0;
  traj.xi = xi;
  traj.sol = solve_ivp(rhs, t0, xi, t1, cfg);
  return traj;
}

Vec eval_dense(const Trajectory& traj, double t) { return traj.sol.at(t); }

Mat transition_matrix(const SystemDef& sys, double t, double s, const IntegratorConfig& cfg) {
  const int n = sys.n;
  if (n <= 0) throw ValidationError("transition_matrix: system has no dimension");
  Mat eye = Mat::Identity(n, n);
  if (t == s) return eye;
  RhsFn rhs = [&sys, n](double u, const Vec& y, Vec& dy) {
    Mat Y = unvec(y, n, n);
    Mat dY = sys.A(u) * Y;
    dy.resize(n * n);
    vec_into(dY, dy);
  };
  Vec y0(n * n);
  vec_into(eye, y0);
  OdeSolution sol = solve_ivp(rhs, s, y0, t, cfg);
  return unvec(sol.final_state(), n, n);
}

}  // namespace palmer
