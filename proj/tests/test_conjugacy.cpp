#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracle_utils.hpp"
#include "palmer/conjugacy.hpp"
#include "palmer/systems.hpp"

using namespace palmer;

namespace {

const DichotomyEstimate kDich{1.0, 1.0};
const double kMu = 0.2 * std::numbers::pi / 2.0;  // sup |f| = c pi/2

TruncationConfig tight_trunc() {
  TruncationConfig t;
  t.tail_tol = 1e-10;
  t.quad_rtol = 1e-11;
  return t;
}

}  // namespace

TEST_CASE("conjugacy is the identity for a linear system") {
  SystemDef sys = linear_diag({-1.0, -3.0});
  Vec nu(2);
  nu << 1.4, -0.6;
  ConjugacyResult res = conjugacy_at(sys, 0.7, nu, kDich, 0.0);
  CHECK(res.value == nu);  // mu = 0 collapses the truncation depth to zero
  CHECK(res.tail_bound == 0.0);
  Mat dh = conjugacy_jacobian(sys, 0.7, nu);
  CHECK(inf_norm(Mat(dh - Mat::Identity(2, 2))) <= 1e-12);
  Vec d2 = conjugacy_hessian(sys, 0.7, nu, 0, 1);
  CHECK(inf_norm(d2) <= 1e-12);
}

TEST_CASE("conjugacy values against high-precision references") {
  SystemDef sys = example4();
  struct Probe {
    double tau, nu, want;
  };
  const Probe probes[] = {
      {0.0, 1.0, 0.89572899002256618},
      {1.0, -1.5, -1.3426065103437941},
      {3.0, 2.0, 1.9656033929721718},
  };
  for (const Probe& p : probes) {
    ConjugacyResult res = conjugacy_at(sys, p.tau, Vec::Constant(1, p.nu), kDich, kMu);
    CHECK(std::abs(res.value[0] - p.want) <= 1e-8);
    CHECK(res.tail_bound <= 1e-8);
    ConjugacyResult fine =
        conjugacy_at(sys, p.tau, Vec::Constant(1, p.nu), kDich, kMu, tight_trunc());
    CHECK(std::abs(fine.value[0] - p.want) <= 1e-9);
    CHECK(fine.quad_nodes > res.quad_nodes);
  }
}

TEST_CASE("conjugacy fixes the origin") {
  SystemDef sys = example4();
  for (double tau : {-2.0, 0.0, 1.5}) {
    ConjugacyResult res = conjugacy_at(sys, tau, Vec::Zero(1), kDich, kMu);
    CHECK(res.value[0] == 0.0);
  }
}

TEST_CASE("conjugacy stays within the uniform bound") {
  SystemDef sys = example4();
  const double bound = 4.0 * kDich.K * kMu / kDich.alpha + 1e-8;
  for (double tau : {-1.0, 0.0, 2.0}) {
    for (double nu : {-2.0, 2.0}) {
      ConjugacyResult res = conjugacy_at(sys, tau, Vec::Constant(1, nu), kDich, kMu);
      CHECK(std::abs(res.value[0] - nu) <= bound);
    }
  }
}

TEST_CASE("evaluation on an orbit composes flow and map") {
  SystemDef sys = example4();
  Trajectory traj = integrate_flow(sys, 0.0, Vec::Ones(1), 2.0);
  ConjugacyResult direct = conjugacy_at(sys, 2.0, traj.final_state(), kDich, kMu);
  ConjugacyResult orbit = conjugacy_on_orbit(sys, Vec::Ones(1), 2.0, kDich, kMu);
  CHECK(std::abs(direct.value[0] - orbit.value[0]) <= 1e-10);
}

TEST_CASE("the conjugacy intertwines the two flows") {
  SystemDef sys = example4();
  std::vector<double> ts{-3, -2, -1, 0, 1, 2, 3};
  CHECK(conjugacy_defect(sys, Vec::Ones(1), ts, kDich, kMu) <= 1e-6);
  CHECK(conjugacy_defect(sys, Vec::Constant(1, -2.0), ts, kDich, kMu) <= 1e-6);
}

TEST_CASE("conjugacy jacobian against high-precision references") {
  SystemDef sys = example4();
  Mat dh1 = conjugacy_jacobian(sys, 0.0, Vec::Ones(1));
  CHECK(std::abs(dh1(0, 0) - 0.94923132615738101) <= 5e-7);
  Mat dh0 = conjugacy_jacobian(sys, 3.0, Vec::Zero(1));
  CHECK(std::abs(dh0(0, 0) - 0.70153333936727704) <= 1e-7);
  CHECK(dh1.determinant() > 0.0);
  CHECK(dh0.determinant() > 0.0);
}

TEST_CASE("conjugacy hessian against a high-precision reference") {
  SystemDef sys = example4();
  Vec d2 = conjugacy_hessian(sys, 0.0, Vec::Ones(1), 0, 0);
  CHECK(std::abs(d2[0] - 0.065756084663111643) <= 1e-5);
  // D2f(t, 0) = 0 for this field, so the second derivative dies at the origin
  Vec at0 = conjugacy_hessian(sys, 3.0, Vec::Zero(1), 0, 0);
  CHECK(std::abs(at0[0]) <= 1e-8);
}

TEST_CASE("conjugacy hessian is symmetric in 2-D") {
  SystemDef sys = arctan_cross();
  Vec x(2);
  x << 1.0, -0.8;
  Vec h01 = conjugacy_hessian(sys, 0.5, x, 0, 1);
  Vec h10 = conjugacy_hessian(sys, 0.5, x, 1, 0);
  CHECK(inf_norm(Vec(h01 - h10)) <= 1e-6);
}

TEST_CASE("inverse round trip") {
  SystemDef sys = example4();
  Vec x = Vec::Constant(1, 1.7);
  ConjugacyResult h = conjugacy_at(sys, 1.2, x, kDich, kMu);
  Vec back = conjugacy_inverse(sys, 1.2, h.value, kDich, kMu);
  CHECK(inf_norm(Vec(back - x)) <= 1e-8);
  Vec zero = conjugacy_inverse(sys, 1.2, Vec::Zero(1), kDich, kMu);
  CHECK(inf_norm(zero) <= 1e-9);
}

TEST_CASE("truncation past the floor raises with best-effort payload") {
  SystemDef sys = example4();
  TruncationConfig trunc;
  trunc.tail_tol = 1e-15;
  trunc.s_min_cap = -10.0;
  bool thrown = false;
  try {
    conjugacy_at(sys, 0.0, Vec::Ones(1), kDich, kMu, trunc);
  } catch (const TruncationError& e) {
    thrown = true;
    CHECK(e.truncation_point == -10.0);
    CHECK(e.tail_bound > 1e-15);
    CHECK(std::isfinite(e.value[0]));
    CHECK(std::abs(e.value[0] - 0.89572899002256618) <= 1e-3);
  }
  CHECK(thrown);
}

TEST_CASE("jacobian flow that cannot stabilize raises ConvergenceError") {
  SystemDef sys = example4();
  TruncationConfig trunc;
  trunc.s_min_cap = -3.0;  // too shallow for even one tail window
  CHECK_THROWS_AS(conjugacy_jacobian(sys, 3.0, Vec::Ones(1), trunc), ConvergenceError);
}

TEST_CASE("input validation") {
  SystemDef sys = example4();
  CHECK_THROWS_AS(conjugacy_at(sys, 0.0, Vec::Ones(2), kDich, kMu), ValidationError);
  CHECK_THROWS_AS(conjugacy_at(sys, 0.0, Vec::Ones(1), DichotomyEstimate{0.5, 1.0}, kMu),
                  ValidationError);
  CHECK_THROWS_AS(conjugacy_at(sys, 0.0, Vec::Ones(1), DichotomyEstimate{1.0, -1.0}, kMu),
                  ValidationError);
  CHECK_THROWS_AS(conjugacy_at(sys, 0.0, Vec::Ones(1), kDich, -0.1), ValidationError);
}
