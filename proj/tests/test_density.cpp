#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracle_utils.hpp"
#include "palmer/density.hpp"
#include "palmer/systems.hpp"

using namespace palmer;

namespace {

GridSpec default_grid(int n) {
  GridSpec g;
  g.x_box.assign(static_cast<std::size_t>(n), {-2.0, 2.0});
  return g;
}

const double kMuE4 = 0.2 * std::numbers::pi / 2.0;

}  // namespace

TEST_CASE("Lyapunov quadrature against the diagonal closed form") {
  SystemDef sys = linear_diag({-1.0});
  LyapunovQuadrature q = lyapunov_P(sys, 0.0, 5.0, 1.0, 1.0);
  CHECK(std::abs(q.P(0, 0) - (1.0 - std::exp(-10.0)) / 2.0) <= 1e-9);
  CHECK(std::abs(q.end_state(0, 0) - std::exp(-5.0)) <= 1e-10);
  CHECK(std::abs(q.end_defect(0, 0) - std::exp(-10.0)) <= 1e-10);
  CHECK(q.tail_bound == doctest::Approx(std::exp(-10.0) / 2.0).epsilon(1e-12));
  CHECK(q.horizon == 5.0);
}

TEST_CASE("default horizon and exponent for diagonal systems") {
  SystemDef one = linear_diag({-1.0});
  LinearDensity ld1 = make_linear_density(one, 1.0, 1.0, default_grid(1));
  const double horizon = std::log(0.5e15) / 2.0;
  CHECK(std::abs(ld1.horizon() - horizon) <= 1e-12);
  CHECK(std::abs(ld1.beta() - 1.0) <= 1e-12);  // (n+1)/2 dominates the margin

  SystemDef two = linear_diag({-1.0, -3.0});
  LinearDensity ld2 = make_linear_density(two, 1.0, 1.0, default_grid(2));
  // positivity margin dominates: 1.1 * lambda_max(P) * |tr A| / (1 - defect)
  CHECK(std::abs(ld2.beta() - 2.2) <= 1e-9);
}

TEST_CASE("linear density values and scaling") {
  SystemDef sys = linear_diag({-1.0});
  LinearDensity ld = make_linear_density(sys, 1.0, 1.0, default_grid(1));
  Vec y2 = Vec::Constant(1, 2.0);
  CHECK(std::abs(rho_linear(ld, 0.0, y2) - 0.5) <= 1e-9);
  // beta = 1: quadratic-form scaling sends rho(2y) to rho(y)/4
  Vec y1 = Vec::Constant(1, 1.0);
  CHECK(testutil::rel_gap(rho_linear(ld, 0.0, y1) / rho_linear(ld, 0.0, y2), 4.0) <= 1e-9);
}

TEST_CASE("closed-form divergence of the linear density") {
  SystemDef sys = linear_diag({-1.0});
  LinearDensity ld = make_linear_density(sys, 1.0, 1.0, default_grid(1));
  double div = rho_linear_divergence(ld, 0.0, Vec::Constant(1, 1.5));
  CHECK(std::abs(div - 8.0 / 9.0) <= 1e-6);  // rho (2 - 1) with V = P |y|^2

  SystemDef two = linear_diag({-1.0, -3.0});
  LinearDensity ld2 = make_linear_density(two, 1.0, 1.0, default_grid(2));
  for (double r : {0.2, 0.7, 1.3, 2.9}) {
    for (double ang : {0.1, 1.3, 2.2, 4.0, 5.6}) {
      Vec y(2);
      y << r * std::cos(ang), r * std::sin(ang);
      CHECK(rho_linear_divergence(ld2, 0.0, y) > 0.0);
    }
  }
}

TEST_CASE("density domain excludes the origin") {
  SystemDef sys = example4();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(1));
  CHECK_THROWS_AS(rho_bar(dp, sys, 0.0, Vec::Zero(1)), DomainError);
}

TEST_CASE("pushforward density is positive with positive divergence") {
  SystemDef sys = example4();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(1));
  for (double t : {-2.0, 0.0, 1.5}) {
    for (double x : {-2.5, -1.0, 0.3, 2.0}) {
      CHECK(rho_bar(dp, sys, t, Vec::Constant(1, x)) > 0.0);
      DivergenceCheck chk = rho_bar_divergence_check(dp, sys, t, Vec::Constant(1, x));
      CHECK(chk.routes_agree);
      CHECK(chk.rel_gap <= 1e-3);
      CHECK(chk.value > 0.0);
      CHECK(chk.transported > 0.0);
    }
  }
}

TEST_CASE("1-D change of variables identity") {
  SystemDef sys = example4();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(1));
  double lhs = testutil::simpson([&](double x) { return rho_bar(dp, sys, 0.0, Vec::Constant(1, x)); },
                                 1.0, 2.0, 64);
  double h_lo = conjugacy_at(sys, 0.0, Vec::Constant(1, 1.0), dp.dich, dp.mu, dp.trunc, dp.cfg)
                    .value[0];
  double h_hi = conjugacy_at(sys, 0.0, Vec::Constant(1, 2.0), dp.dich, dp.mu, dp.trunc, dp.cfg)
                    .value[0];
  double rhs = testutil::simpson(
      [&](double y) { return rho_linear(dp.linear, 0.0, Vec::Constant(1, y)); }, h_lo, h_hi, 64);
  CHECK(testutil::rel_gap(lhs, rhs) <= 1e-4);
}

TEST_CASE("far-field shells contract at the expected rate") {
  SystemDef sys = example4();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(1));
  IntegrabilityResult ir = integrability_check(dp, sys, 0.0, 1.0, 16.0);
  CHECK(ir.pass);
  CHECK(std::abs(ir.expected_ratio - 0.5) <= 1e-12);  // 2^{n - 2 beta}, beta = 1
  REQUIRE(ir.ratios.size() >= 2);
  CHECK(std::abs(ir.ratios.back() - ir.expected_ratio) <= 0.15);
  for (double inc : ir.increments) CHECK(inc > 0.0);
  CHECK(ir.value > ir.partials.back());
  CHECK(std::isfinite(ir.tail_estimate));
}

TEST_CASE("the 2 beta = n boundary is flagged as non-integrable") {
  SystemDef sys = linear_diag({-1.0});
  const double horizon = std::log(0.5e15) / 2.0;
  LinearDensity ld(sys, 1.0, 1.0, 0.5, horizon, IntegratorConfig{});
  DensityPair dp;
  dp.linear = ld;
  dp.dich = {1.0, 1.0};
  dp.mu = 0.0;  // identity conjugacy: rho_bar falls back to rho itself
  IntegrabilityResult ir = integrability_check(dp, sys, 0.0, 1.0, 16.0);
  CHECK_FALSE(ir.pass);
  CHECK(std::abs(ir.expected_ratio - 1.0) <= 1e-12);
  CHECK(ir.ratios.back() > 0.9);
}

TEST_CASE("pushforward reduces to the linear density when f vanishes") {
  SystemDef sys = linear_diag({-1.0, -3.0});
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, 0.0, default_grid(2));
  Vec x(2);
  x << 1.2, -0.7;
  for (double t : {-1.0, 0.0, 2.0}) {
    double bar = rho_bar(dp, sys, t, x);
    double lin = rho_linear(dp.linear, t, x);
    CHECK(testutil::rel_gap(bar, lin) <= 1e-8);
  }
}

TEST_CASE("2-D pushforward density behaves on the annulus") {
  SystemDef sys = arctan_cross();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(2));
  CHECK(dp.linear.beta() >= 1.5);
  Vec x(2);
  x << 1.0, -1.0;
  CHECK(rho_bar(dp, sys, 0.5, x) > 0.0);
  DivergenceCheck chk = rho_bar_divergence_check(dp, sys, 0.5, x);
  CHECK(chk.routes_agree);
  CHECK(chk.value > 0.0);
}

TEST_CASE("integrability guard rails") {
  SystemDef sys = example4();
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, kMuE4, default_grid(1));
  CHECK_THROWS_AS(integrability_check(dp, sys, 0.0, 0.0, 16.0), ValidationError);
  CHECK_THROWS_AS(integrability_check(dp, sys, 0.0, 1.0, 2.0), ValidationError);
}
