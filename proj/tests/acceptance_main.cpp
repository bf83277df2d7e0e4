// Acceptance gate: one line per criterion, exit 1 if any fails.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "palmer/cli.hpp"
#include "palmer/systems.hpp"

using namespace palmer;

namespace {

int g_failures = 0;
std::vector<double> g_dets;  // every Jacobian determinant seen anywhere

const double kPi = std::numbers::pi;

void run_criterion(const std::string& label, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
    ok = false;
  }
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << label;
  if (!detail.empty()) std::cout << "  (" << detail << ")";
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

double rel(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-12});
}

Vec vec1(double v) { return Vec::Constant(1, v); }

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double simpson(const std::function<double(double)>& fn, double a, double b, int panels) {
  const int m = 2 * panels;
  const double h = (b - a) / m;
  double sum = fn(a) + fn(b);
  for (int k = 1; k < m; ++k) sum += fn(a + k * h) * (k % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

bool identity_reduction(std::string& detail) {
  double max_h = 0, max_det = 0, max_rho = 0;
  auto sweep = [&](const SystemDef& sys, GridSpec grid) {
    DensityPair dp = make_density_pair(sys, 1.0, 1.0, 0.0, grid);
    for (double t : grid.t_values()) {
      for (const Vec& x : grid.x_values()) {
        ConjugacyResult res = conjugacy_at(sys, t, x, dp.dich, dp.mu, dp.trunc);
        max_h = std::max(max_h, inf_norm(Vec(res.value - x)));
        double det = conjugacy_jacobian(sys, t, x, dp.trunc).determinant();
        g_dets.push_back(det);
        max_det = std::max(max_det, std::abs(det - 1.0));
        if (inf_norm(x) > 0) {
          max_rho = std::max(max_rho, rel(rho_bar(dp, sys, t, x), rho_linear(dp.linear, t, x)));
        }
      }
    }
  };
  GridSpec g1;
  g1.t_count = 21;
  g1.x_box = {{-2.0, 2.0}};
  g1.x_count_per_dim = 21;
  sweep(linear_diag({-1.0}), g1);
  GridSpec g2;
  g2.t_count = 5;
  g2.x_box = {{-2.0, 2.0}, {-2.0, 2.0}};
  g2.x_count_per_dim = 5;
  sweep(linear_diag({-1.0, -3.0}), g2);
  detail = "max |H-x| " + format_double(max_h) + ", max |det-1| " + format_double(max_det) +
           ", max rho gap " + format_double(max_rho);
  return max_h <= 1e-9 && max_det <= 1e-8 && max_rho <= 1e-8;
}

bool conjugacy_identity(std::string& detail) {
  SystemDef sys = example4();
  DichotomyEstimate dich{1.0, 1.0};
  const double mu = 0.1 * kPi;
  std::vector<double> ts{-3, -2, -1, 0, 1, 2, 3};
  double max_defect = 0;
  for (double xi : {-2.0, -1.0, 1.0, 2.0}) {
    max_defect = std::max(max_defect, conjugacy_defect(sys, vec1(xi), ts, dich, mu));
  }
  detail = "max defect " + format_double(max_defect);
  return max_defect <= 1e-6;
}

bool deviation_bound(std::string& detail) {
  SystemDef sys = example4();
  DichotomyEstimate dich{1.0, 1.0};
  const double mu = 0.1 * kPi;
  TruncationConfig trunc;
  double max_dev = 0;
  for (double t : {-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0}) {
    for (double x : {-2.0, -1.0, 1.0, 2.0}) {
      ConjugacyResult res = conjugacy_at(sys, t, vec1(x), dich, mu, trunc);
      max_dev = std::max(max_dev, std::abs(res.value[0] - x));
    }
  }
  const double bound = 4.0 * dich.K * mu / dich.alpha + trunc.tail_tol;
  detail = "max |H-id| " + format_double(max_dev) + " vs bound " + format_double(bound);
  return max_dev <= bound;
}

bool derivative_consistency(std::string& detail) {
  SystemDef sys = example4();
  DichotomyEstimate dich{1.0, 1.0};
  const double mu = 0.1 * kPi;
  TruncationConfig tight{1e-12, -200.0, 1e-13};
  std::mt19937_64 rng(20260815);
  std::uniform_real_distribution<double> ut(-2.0, 2.0), ux(-2.0, 2.0);
  double worst_dh = 0;
  for (int k = 0; k < 50; ++k) {
    double t = ut(rng), x = ux(rng);
    double dh = conjugacy_jacobian(sys, t, vec1(x), tight)(0, 0);
    g_dets.push_back(dh);
    double h = 1e-4 * std::max(1.0, std::abs(x));
    double hp = conjugacy_at(sys, t, vec1(x + h), dich, mu, tight).value[0];
    double hm = conjugacy_at(sys, t, vec1(x - h), dich, mu, tight).value[0];
    worst_dh = std::max(worst_dh, rel(dh, (hp - hm) / (2.0 * h)));
  }
  // the hessian limit stabilizes against integrator noise near 1e-10, so it
  // keeps the default tail tolerance; only the H evaluations feeding the
  // finite differences need the tight truncation
  TruncationConfig hess_cfg;
  double worst_d2 = 0;
  for (int k = 0; k < 10; ++k) {
    double t = ut(rng), x = ux(rng);
    double d2 = conjugacy_hessian(sys, t, vec1(x), 0, 0, hess_cfg)[0];
    const double h = 2e-3;
    double c0 = conjugacy_at(sys, t, vec1(x), dich, mu, tight).value[0];
    double cp = conjugacy_at(sys, t, vec1(x + h), dich, mu, tight).value[0];
    double cm = conjugacy_at(sys, t, vec1(x - h), dich, mu, tight).value[0];
    double fd = (cp - 2.0 * c0 + cm) / (h * h);
    worst_d2 = std::max(worst_d2, std::abs(d2 - fd) / std::max(1.0, std::abs(d2)));
  }
  SystemDef cross = arctan_cross();
  double worst_sym = 0;
  for (const Vec& x : {vec2(0.9, -0.6), vec2(-1.2, 0.4), vec2(0.3, 1.1)}) {
    Vec hij = conjugacy_hessian(cross, 0.4, x, 0, 1, hess_cfg);
    Vec hji = conjugacy_hessian(cross, 0.4, x, 1, 0, hess_cfg);
    worst_sym = std::max(worst_sym, inf_norm(Vec(hij - hji)));
  }
  detail = "DH gap " + format_double(worst_dh) + ", D2H gap " + format_double(worst_d2) +
           ", symmetry " + format_double(worst_sym);
  return worst_dh <= 1e-4 && worst_d2 <= 1e-3 && worst_sym <= 1e-6;
}

bool oracle_equivalence(std::string& detail) {
  SystemDef sys = example4();
  TruncationConfig tight{1e-10, -200.0, 1e-11};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ut(-2.0, 2.0), ux(-2.0, 2.0), ulag(0.1, 4.0);
  double worst_z = 0, worst_psi = 0;
  for (int k = 0; k < 50; ++k) {
    double t = ut(rng), x = ux(rng);
    double z = conjugacy_jacobian(sys, t, vec1(x), tight)(0, 0);
    g_dets.push_back(z);
    double want = sys.oracle.conjugacy_jacobian(t, vec1(x))(0, 0);
    worst_z = std::max(worst_z, rel(z, want));
    double s = t - ulag(rng);
    double psi = transition_matrix(sys, t, s)(0, 0);
    worst_psi = std::max(worst_psi, rel(psi, std::exp(-(t - s))));
  }
  detail = "Z gap " + format_double(worst_z) + ", Psi gap " + format_double(worst_psi);
  return worst_z <= 1e-6 && worst_psi <= 1e-6;
}

bool inverse_round_trip(std::string& detail) {
  SystemDef sys = example4();
  DichotomyEstimate dich{1.0, 1.0};
  const double mu = 0.1 * kPi;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ut(-2.0, 2.0), ux(-2.5, 2.5);
  double worst = 0;
  for (int k = 0; k < 50; ++k) {
    double t = ut(rng), x = ux(rng);
    Vec y = conjugacy_at(sys, t, vec1(x), dich, mu).value;
    Vec back = conjugacy_inverse(sys, t, y, dich, mu);
    worst = std::max(worst, std::abs(back[0] - x));
  }
  detail = "max round-trip error " + format_double(worst);
  return worst <= 1e-8;
}

bool hypothesis_suite(std::string& detail) {
  SystemDef sys = example4();
  GridSpec grid;
  grid.x_box = {{-2.0, 2.0}};
  grid.xi_probes = {vec1(-1.0), vec1(1.0)};
  HypothesisReport rep = run_hypothesis_suite(sys, grid);
  bool fit_ok = std::abs(rep.K - 1.0) <= 0.05 && std::abs(rep.alpha - 1.0) <= 0.05;

  GridSpec wide;
  wide.t_count = 41;
  wide.x_box = {{-100.0, 100.0}};
  wide.x_count_per_dim = 41;
  FBounds fb = estimate_f_bounds(sys, wide);
  bool bounds_ok = rel(fb.mu, 0.1 * kPi) <= 0.01 && rel(fb.gamma, 0.2) <= 0.01;

  bool d1_ok = !rep.d1.empty();
  double d1_max = 0;
  for (const D1Entry& e : rep.d1) {
    double total = e.result.value + e.result.tail;
    d1_ok = d1_ok && e.result.pass && e.result.certified && total < 1.0;
    d1_max = std::max(d1_max, total);
  }
  d1_ok = d1_ok && d1_max <= 0.356;  // 0.2 sqrt(pi) plus rounding headroom

  bool d2_ok = !rep.d2.empty();
  for (const D2Entry& e : rep.d2) d2_ok = d2_ok && e.result.pass;
  bool d3_ok = !rep.d3.empty();
  double d3_worst = 0;
  for (const D3Entry& e : rep.d3) {
    d3_ok = d3_ok && e.result.pass;
    d3_worst = std::max(d3_worst, e.result.max_disagreement);
  }

  GronwallResult gw = check_gronwall(sys, vec1(1.0), {0.0, 1.0, 2.0, 4.0}, rep.K, rep.alpha,
                                     rep.gamma);
  detail = "K " + format_double(rep.K) + ", alpha " + format_double(rep.alpha) + ", mu gap " +
           format_double(rel(fb.mu, 0.1 * kPi)) + ", D1 max " + format_double(d1_max) +
           ", D3 gap " + format_double(d3_worst);
  return fit_ok && bounds_ok && d1_ok && d2_ok && d3_ok && gw.pass && rep.all_pass &&
         !rep.any_uncertified;
}

bool orientation(std::string& detail) {
  double min_det = std::numeric_limits<double>::infinity();
  for (double d : g_dets) min_det = std::min(min_det, d);
  detail = "min det over " + std::to_string(g_dets.size()) + " probes: " + format_double(min_det);
  return !g_dets.empty() && min_det > 0;
}

bool density_suite(std::string& detail) {
  SystemDef sys = example4();
  GridSpec grid;
  grid.x_box = {{-2.0, 2.0}};
  DensityPair dp = make_density_pair(sys, 1.0, 1.0, 0.1 * kPi, grid);

  // closed-form vs finite-difference routes are enforced inside the call
  bool lin_ok = true;
  GridSpec g2;
  g2.x_box = {{-2.0, 2.0}, {-2.0, 2.0}};
  LinearDensity ld2 = make_linear_density(linear_diag({-1.0, -3.0}), 1.0, 1.0, g2);
  for (double r : {0.3, 1.0, 2.5}) {
    for (double ang : {0.2, 1.1, 2.4, 3.9, 5.3}) {
      lin_ok = lin_ok && rho_linear_divergence(ld2, 0.3, vec2(r * std::cos(ang),
                                                              r * std::sin(ang))) > 0;
    }
    lin_ok = lin_ok && rho_linear_divergence(dp.linear, -1.0, vec1(r)) > 0 &&
             rho_linear_divergence(dp.linear, -1.0, vec1(-r)) > 0;
  }

  double min_div = std::numeric_limits<double>::infinity();
  bool push_ok = true;
  for (double t : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (double r : {0.2, 1.0, 3.0}) {
      for (double sgn : {-1.0, 1.0}) {
        DivergenceCheck chk = rho_bar_divergence_check(dp, sys, t, vec1(sgn * r));
        push_ok = push_ok && chk.routes_agree && chk.value > 0;
        min_div = std::min(min_div, chk.value);
      }
    }
  }

  double lhs = simpson([&](double x) { return rho_bar(dp, sys, 0.0, vec1(x)); }, 1.0, 2.0, 32);
  double h_lo = conjugacy_at(sys, 0.0, vec1(1.0), dp.dich, dp.mu, dp.trunc).value[0];
  double h_hi = conjugacy_at(sys, 0.0, vec1(2.0), dp.dich, dp.mu, dp.trunc).value[0];
  double rhs = simpson([&](double y) { return rho_linear(dp.linear, 0.0, vec1(y)); }, h_lo, h_hi,
                       32);
  bool change_ok = rel(lhs, rhs) <= 1e-4;

  IntegrabilityResult ir = integrability_check(dp, sys, 0.0, 1.0, 16.0);

  SystemDef lin = linear_diag({-1.0});
  LinearDensity boundary(lin, 1.0, 1.0, 0.5, std::log(0.5e15) / 2.0, IntegratorConfig{});
  DensityPair bp;
  bp.linear = boundary;
  bp.dich = {1.0, 1.0};
  bp.mu = 0.0;
  bool boundary_flagged = !integrability_check(bp, lin, 0.0, 1.0, 16.0).pass;

  detail = "min divergence " + format_double(min_div) + ", change-of-variables gap " +
           format_double(rel(lhs, rhs)) + ", shell ratio " + format_double(ir.ratios.back());
  return lin_ok && push_ok && change_ok && ir.pass && boundary_flagged;
}

bool split_path(std::string& detail) {
  SystemDef sys = corollary_example();
  bool exact0 = true;
  for (double t : {-2.0, 0.0, 1.0, 3.0}) {
    exact0 = exact0 && sys.f(t, Vec::Zero(1))[0] == 0.0 && sys.Df(t, Vec::Zero(1))(0, 0) == 0.0;
  }
  GridSpec grid;
  grid.x_box = {{-2.0, 2.0}};
  grid.xi_probes = {vec1(-1.0), vec1(1.0)};
  HypothesisReport rep = run_hypothesis_suite(sys, grid);

  DensityPair dp = make_density_pair(sys, rep.K, rep.alpha, rep.mu, grid);
  bool dens_ok = true;
  for (double t : {-1.0, 0.0, 1.0}) {
    for (double x : {-1.5, -0.5, 0.5, 1.5}) {
      DivergenceCheck chk = rho_bar_divergence_check(dp, sys, t, vec1(x));
      dens_ok = dens_ok && chk.routes_agree && chk.value > 0;
    }
  }
  IntegrabilityResult ir = integrability_check(dp, sys, 0.0, 1.0, 16.0);
  detail = "K " + format_double(rep.K) + ", suite " + (rep.all_pass ? "pass" : "fail") +
           ", shell ratio " + format_double(ir.ratios.back());
  return exact0 && rep.all_pass && !rep.any_uncertified && dens_ok && ir.pass;
}

bool determinism(std::string& detail) {
  namespace fs = std::filesystem;
  fs::path out = fs::temp_directory_path() / "palmer_acceptance_sweep";
  fs::remove_all(out);
  RunConfig cfg;
  cfg.system = "example4";
  cfg.grid.t_range = {-1.0, 1.0};
  cfg.grid.t_count = 3;
  cfg.grid.x_count_per_dim = 5;
  cfg.tasks = {"sweep"};
  cfg.output_dir = out.string();
  int rc1 = cmd_sweep(cfg);
  std::string conj = slurp(out / "conjugacy.csv");
  std::string dens = slurp(out / "density.csv");
  int rc2 = cmd_sweep(cfg);
  bool same = conj == slurp(out / "conjugacy.csv") && dens == slurp(out / "density.csv");
  detail = "exit codes " + std::to_string(rc1) + "/" + std::to_string(rc2) + ", " +
           (same ? "byte-identical" : "outputs differ");
  return rc1 == 0 && rc2 == 0 && !conj.empty() && !dens.empty() && same;
}

}  // namespace

int main() {
  std::cout << "acceptance: nonautonomous conjugacy and density toolkit" << std::endl;
  run_criterion("01 identity reduction on f = 0 presets", identity_reduction);
  run_criterion("02 conjugacy functional equation defect <= 1e-6", conjugacy_identity);
  run_criterion("03 sup |H - id| within 4 K mu / alpha + tail", deviation_bound);
  run_criterion("04 DH and D2H match finite differences, Hessian symmetric", derivative_consistency);
  run_criterion("05 Jacobian limit and transition matrix match closed forms", oracle_equivalence);
  run_criterion("06 inverse round trip <= 1e-8", inverse_round_trip);
  run_criterion("07 hypothesis suite certifies the scalar preset", hypothesis_suite);
  run_criterion("08 det DH > 0 at every probe", orientation);
  run_criterion("09 density suite: divergence, change of variables, integrability", density_suite);
  run_criterion("10 split vector-field path certifies end to end", split_path);
  run_criterion("11 repeated sweeps are byte-identical", determinism);
  if (g_failures == 0) {
    std::cout << "acceptance: all 11 criteria passed" << std::endl;
    return 0;
  }
  std::cout << "acceptance: " << g_failures << " criteria failed" << std::endl;
  return 1;
}
