#include "palmer/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "palmer/parallel.hpp"
#include "palmer/systems.hpp"

namespace palmer {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

double as_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ValidationError("config: '" + key + "' must be a number");
  return j.get<double>();
}

long long as_integer(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ValidationError("config: '" + key + "' must be an integer");
  return j.get<long long>();
}

std::vector<double> as_number_list(const json& j, const std::string& key) {
  if (!j.is_array()) throw ValidationError("config: '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(as_number(e, key));
  return out;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");

  static const std::set<std::string> known = {
      "system", "params", "t_range", "t_count", "x_box", "x_count_per_dim", "xi_probes",
      "tail_tol", "s_min_cap", "quad_rtol", "rtol", "atol", "max_step", "max_steps",
      "tasks", "output_dir", "seed", "strict", "K", "alpha", "mu", "gamma"};
  for (const auto& [key, val] : j.items()) {
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  }

  RunConfig cfg;
  if (j.count("system")) {
    if (!j["system"].is_string()) throw ValidationError("config: 'system' must be a string");
    cfg.system = j["system"].get<std::string>();
  }
  if (j.count("params")) {
    if (!j["params"].is_object()) throw ValidationError("config: 'params' must be an object");
    for (const auto& [key, val] : j["params"].items()) {
      if (val.is_number()) {
        cfg.scalar_params[key] = val.get<double>();
      } else if (val.is_array()) {
        cfg.vector_params[key] = as_number_list(val, "params." + key);
      } else {
        throw ValidationError("config: params." + key + " must be a number or number array");
      }
    }
  }
  if (j.count("t_range")) {
    auto r = as_number_list(j["t_range"], "t_range");
    if (r.size() != 2) throw ValidationError("config: 't_range' must be [lo, hi]");
    cfg.grid.t_range = {r[0], r[1]};
  }
  if (j.count("t_count")) cfg.grid.t_count = static_cast<int>(as_integer(j["t_count"], "t_count"));
  if (j.count("x_box")) {
    if (!j["x_box"].is_array()) throw ValidationError("config: 'x_box' must be an array");
    for (const auto& e : j["x_box"]) {
      auto r = as_number_list(e, "x_box entry");
      if (r.size() != 2) throw ValidationError("config: each x_box entry must be [lo, hi]");
      cfg.grid.x_box.push_back({r[0], r[1]});
    }
  }
  if (j.count("x_count_per_dim")) {
    cfg.grid.x_count_per_dim = static_cast<int>(as_integer(j["x_count_per_dim"], "x_count_per_dim"));
  }
  if (j.count("xi_probes")) {
    if (!j["xi_probes"].is_array()) throw ValidationError("config: 'xi_probes' must be an array");
    for (const auto& e : j["xi_probes"]) {
      auto r = as_number_list(e, "xi_probes entry");
      Vec v(static_cast<long>(r.size()));
      for (std::size_t k = 0; k < r.size(); ++k) v[static_cast<long>(k)] = r[k];
      cfg.grid.xi_probes.push_back(v);
    }
  }
  if (j.count("tail_tol")) cfg.trunc.tail_tol = as_number(j["tail_tol"], "tail_tol");
  if (j.count("s_min_cap")) cfg.trunc.s_min_cap = as_number(j["s_min_cap"], "s_min_cap");
  if (j.count("quad_rtol")) cfg.trunc.quad_rtol = as_number(j["quad_rtol"], "quad_rtol");
  if (j.count("rtol")) cfg.integrator.rtol = as_number(j["rtol"], "rtol");
  if (j.count("atol")) cfg.integrator.atol = as_number(j["atol"], "atol");
  if (j.count("max_step")) cfg.integrator.max_step = as_number(j["max_step"], "max_step");
  if (j.count("max_steps")) {
    cfg.integrator.max_steps = static_cast<std::size_t>(as_integer(j["max_steps"], "max_steps"));
  }
  if (j.count("tasks")) {
    if (!j["tasks"].is_array()) throw ValidationError("config: 'tasks' must be an array");
    cfg.tasks.clear();
    for (const auto& e : j["tasks"]) {
      if (!e.is_string()) throw ValidationError("config: tasks must be strings");
      cfg.tasks.push_back(e.get<std::string>());
    }
  }
  if (j.count("output_dir")) {
    if (!j["output_dir"].is_string()) throw ValidationError("config: 'output_dir' must be a string");
    cfg.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.count("seed")) cfg.seed = static_cast<std::uint64_t>(as_integer(j["seed"], "seed"));
  if (j.count("strict")) {
    if (!j["strict"].is_boolean()) throw ValidationError("config: 'strict' must be a boolean");
    cfg.strict = j["strict"].get<bool>();
  }
  if (j.count("K")) cfg.overrides.K = as_number(j["K"], "K");
  if (j.count("alpha")) cfg.overrides.alpha = as_number(j["alpha"], "alpha");
  if (j.count("mu")) cfg.overrides.mu = as_number(j["mu"], "mu");
  if (j.count("gamma")) cfg.overrides.gamma = as_number(j["gamma"], "gamma");

  static const std::set<std::string> task_names = {"check", "conjugacy", "density", "sweep"};
  for (const auto& t : cfg.tasks) {
    if (!task_names.count(t)) throw ValidationError("config: unknown task '" + t + "'");
  }
  return cfg;
}

SystemDef make_system(RunConfig& cfg) {
  auto scalar = [&](const char* key, double dflt) {
    auto it = cfg.scalar_params.find(key);
    return it == cfg.scalar_params.end() ? dflt : it->second;
  };
  auto check_params = [&](std::set<std::string> scalars, std::set<std::string> vectors) {
    for (const auto& [key, _] : cfg.scalar_params) {
      if (!scalars.count(key)) {
        throw ValidationError("config: preset '" + cfg.system + "' has no parameter '" + key + "'");
      }
    }
    for (const auto& [key, _] : cfg.vector_params) {
      if (!vectors.count(key)) {
        throw ValidationError("config: preset '" + cfg.system + "' has no list parameter '" + key +
                              "'");
      }
    }
  };

  SystemDef sys;
  if (cfg.system == "example4") {
    check_params({"a", "c"}, {});
    sys = example4(scalar("a", 1.0), scalar("c", 0.2));
  } else if (cfg.system == "linear_diag") {
    check_params({}, {"d"});
    auto it = cfg.vector_params.find("d");
    sys = linear_diag(it == cfg.vector_params.end() ? std::vector<double>{-1.0} : it->second);
  } else if (cfg.system == "corollary_example") {
    check_params({"a", "c"}, {});
    sys = corollary_example(scalar("a", 1.0), scalar("c", 0.1));
  } else if (cfg.system == "arctan_cross") {
    check_params({"a1", "a2", "c"}, {});
    sys = arctan_cross(scalar("a1", 1.0), scalar("a2", 2.0), scalar("c", 0.2));
  } else {
    throw ValidationError("config: unknown system preset '" + cfg.system + "'");
  }
  if (cfg.grid.x_box.empty()) {
    cfg.grid.x_box.assign(static_cast<std::size_t>(sys.n), {-2.0, 2.0});
  }
  cfg.grid.validate(sys.n);
  return sys;
}

std::string format_double(double v) {
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 12);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void write_text_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  out << body;
}

void write_json_file(const std::filesystem::path& p, const ordered_json& j) {
  write_text_file(p, j.dump(2) + "\n");
}

struct Estimates {
  DichotomyFit fit;
  bool estimated = false;
  double K = 1, alpha = 1, mu = 0, gamma = 0;
};

Estimates make_estimates(const SystemDef& sys, const RunConfig& cfg) {
  Estimates est;
  if (cfg.overrides.K && cfg.overrides.alpha) {
    est.K = *cfg.overrides.K;
    est.alpha = *cfg.overrides.alpha;
  } else {
    est.fit = estimate_dichotomy(sys, cfg.grid, cfg.integrator);
    est.estimated = true;
    est.K = cfg.overrides.K.value_or(est.fit.K);
    est.alpha = cfg.overrides.alpha.value_or(est.fit.alpha);
  }
  if (cfg.overrides.mu && cfg.overrides.gamma) {
    est.mu = *cfg.overrides.mu;
    est.gamma = *cfg.overrides.gamma;
  } else {
    FBounds fb = estimate_f_bounds(sys, cfg.grid);
    est.mu = cfg.overrides.mu.value_or(fb.mu);
    est.gamma = cfg.overrides.gamma.value_or(fb.gamma);
  }
  return est;
}

ordered_json fit_json(const DichotomyFit& f) {
  return ordered_json{{"K", f.K},
                      {"alpha", f.alpha},
                      {"validated", f.validated},
                      {"max_violation", f.max_violation},
                      {"sample_count", f.sample_count},
                      {"mean_slack", f.mean_slack}};
}

ordered_json report_json(const HypothesisReport& rep) {
  ordered_json out;
  out["system"] = rep.system_name;
  out["dichotomy"] = fit_json(rep.dichotomy);
  out["dichotomy_ok"] = rep.dichotomy_ok;
  out["K"] = rep.K;
  out["alpha"] = rep.alpha;
  out["mu"] = rep.mu;
  out["gamma"] = rep.gamma;
  out["h4"] = ordered_json{{"pass", rep.h4.pass}, {"margin", rep.h4.margin}};
  out["h5"] = ordered_json{{"flagged", rep.h5_flagged},
                           {"ok", rep.h5_ok},
                           {"max_violation", rep.h5_max_violation}};
  out["d1"] = ordered_json::array();
  for (const auto& e : rep.d1) {
    out["d1"].push_back(ordered_json{{"t", e.t},
                                     {"xi", to_std(e.xi)},
                                     {"value", e.result.value},
                                     {"tail", e.result.tail},
                                     {"certified", e.result.certified},
                                     {"pass", e.result.pass},
                                     {"s_reached", e.result.s_reached}});
  }
  out["d2"] = ordered_json::array();
  for (const auto& e : rep.d2) {
    out["d2"].push_back(ordered_json{{"t", e.t},
                                     {"xi", to_std(e.xi)},
                                     {"s_values", e.result.s_values},
                                     {"trace_lin", e.result.trace_lin},
                                     {"trace_total", e.result.trace_total},
                                     {"min_lin", e.result.min_lin},
                                     {"min_total", e.result.min_total},
                                     {"slope_lin", e.result.slope_lin},
                                     {"slope_total", e.result.slope_total},
                                     {"pass", e.result.pass}});
  }
  out["d3"] = ordered_json::array();
  for (const auto& e : rep.d3) {
    out["d3"].push_back(ordered_json{{"t", e.t},
                                     {"xi", to_std(e.xi)},
                                     {"i", e.i},
                                     {"j", e.j},
                                     {"s_values", e.result.s_values},
                                     {"max_disagreement", e.result.max_disagreement},
                                     {"last_gap_fd", e.result.last_gap_fd},
                                     {"last_gap_var", e.result.last_gap_var},
                                     {"cauchy_fd", e.result.cauchy_fd},
                                     {"cauchy_var", e.result.cauchy_var},
                                     {"pass", e.result.pass}});
  }
  if (rep.gronwall) {
    out["gronwall"] = ordered_json{{"t_values", rep.gronwall->t_values},
                                   {"lhs", rep.gronwall->lhs},
                                   {"rhs", rep.gronwall->rhs},
                                   {"min_margin", rep.gronwall->min_margin},
                                   {"pass", rep.gronwall->pass}};
  }
  out["notes"] = rep.notes;
  out["all_pass"] = rep.all_pass;
  out["any_uncertified"] = rep.any_uncertified;
  return out;
}

void print_kv(const std::string& key, const std::string& value) {
  std::cout << "  " << std::left << std::setw(22) << key << value << "\n";
}

std::filesystem::path ensure_output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

int cmd_check(RunConfig cfg) {
  SystemDef sys = make_system(cfg);
  auto dir = ensure_output_dir(cfg);
  ordered_json out;
  int code = 0;
  std::cout << "check: " << sys.name << "\n";
  try {
    HypothesisReport rep = run_hypothesis_suite(sys, cfg.grid, cfg.trunc, cfg.integrator,
                                                cfg.overrides);
    out = report_json(rep);

    // Seeded round-trip probes: x -> H -> inverse -> back, worst residual.
    bool inverse_pass = true;
    if (rep.dichotomy_ok || (cfg.overrides.K && cfg.overrides.alpha)) {
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> ut(cfg.grid.t_range[0], cfg.grid.t_range[1]);
      DichotomyEstimate dich{rep.K, rep.alpha};
      double worst = 0;
      const int probes = 8;
      std::string failure;
      try {
        for (int p = 0; p < probes; ++p) {
          double t = ut(rng);
          Vec x(sys.n);
          for (int dimension = 0; dimension < sys.n; ++dimension) {
            const auto& b = cfg.grid.x_box[static_cast<std::size_t>(dimension)];
            x[dimension] = std::uniform_real_distribution<double>(b[0], b[1])(rng);
          }
          Vec y = conjugacy_at(sys, t, x, dich, rep.mu, cfg.trunc, cfg.integrator).value;
          Vec back = conjugacy_inverse(sys, t, y, dich, rep.mu, cfg.trunc, cfg.integrator);
          worst = std::max(worst, inf_norm(Vec(back - x)));
        }
      } catch (const Error& e) {
        failure = e.what();
      }
      inverse_pass = failure.empty() && worst <= 1e-8;
      out["inverse_round_trip"] = ordered_json{{"probes", probes},
                                               {"max_residual", worst},
                                               {"pass", inverse_pass}};
      if (!failure.empty()) out["inverse_round_trip"]["error"] = failure;
    }

    bool all = rep.all_pass && inverse_pass;
    code = all ? ((cfg.strict && rep.any_uncertified) ? 1 : 0) : 1;
    print_kv("K, alpha", format_double(rep.K) + ", " + format_double(rep.alpha));
    print_kv("mu, gamma", format_double(rep.mu) + ", " + format_double(rep.gamma));
    print_kv("h4 margin", format_double(rep.h4.margin));
    print_kv("all_pass", all ? "yes" : "no");
    print_kv("uncertified", rep.any_uncertified ? "yes" : "no");
  } catch (const StabilityError& e) {
    out["system"] = sys.name;
    out["dichotomy_ok"] = false;
    out["stability_error"] = e.what();
    out["all_pass"] = false;
    print_kv("dichotomy", std::string("failed: ") + e.what());
    code = 1;
  }
  out["strict"] = cfg.strict;
  out["exit_code"] = code;
  write_json_file(dir / "check_report.json", out);
  print_kv("report", (dir / "check_report.json").string());
  return code;
}

int cmd_conjugacy(RunConfig cfg) {
  SystemDef sys = make_system(cfg);
  auto dir = ensure_output_dir(cfg);
  Estimates est = make_estimates(sys, cfg);
  DichotomyEstimate dich{est.K, est.alpha};
  const int n = sys.n;

  std::vector<double> ts = cfg.grid.t_values();
  std::vector<Vec> xs = cfg.grid.x_values();
  struct Row {
    double t = 0;
    Vec x, h;
    double det = 0, defect = 0, tail = 0;
    std::string status = "ok";
  };
  std::vector<Row> rows(ts.size() * xs.size());
  parallel_for(rows.size(), [&](std::size_t idx) {
    Row& row = rows[idx];
    row.t = ts[idx / xs.size()];
    row.x = xs[idx % xs.size()];
    row.h = Vec::Zero(n);
    try {
      ConjugacyResult hr = conjugacy_at(sys, row.t, row.x, dich, est.mu, cfg.trunc, cfg.integrator);
      row.h = hr.value;
      row.tail = hr.tail_bound;
      row.det = conjugacy_jacobian(sys, row.t, row.x, cfg.trunc, cfg.integrator).determinant();
      ConjugacyResult h0 = conjugacy_at(sys, 0.0, row.x, dich, est.mu, cfg.trunc, cfg.integrator);
      ConjugacyResult ht = conjugacy_on_orbit(sys, row.x, row.t, dich, est.mu, cfg.trunc,
                                              cfg.integrator);
      Vec moved = transition_matrix(sys, row.t, 0.0, cfg.integrator) * h0.value;
      row.defect = inf_norm(Vec(ht.value - moved));
      if (!std::isfinite(row.det) || !std::isfinite(row.defect) || !row.h.allFinite()) {
        row = Row{row.t, row.x, Vec::Zero(n), 0, 0, 0, "error:nonfinite"};
      }
    } catch (const Error& e) {
      row = Row{row.t, row.x, Vec::Zero(n), 0, 0, 0, "error:" + sanitize(e.what())};
    }
  });

  std::ostringstream csv;
  {
    std::ostringstream head;
    head << "t";
    for (int d = 1; d <= n; ++d) head << ",x" << d;
    for (int d = 1; d <= n; ++d) head << ",H" << d;
    head << ",detDH,defect,tail_bound,status";
    csv << head.str() << "\n";
  }
  double max_defect = 0, max_dev = 0, min_det = std::numeric_limits<double>::infinity();
  std::size_t errors = 0;
  for (const Row& row : rows) {
    csv << format_double(row.t);
    for (int d = 0; d < n; ++d) csv << ',' << format_double(row.x[d]);
    for (int d = 0; d < n; ++d) csv << ',' << format_double(row.h[d]);
    csv << ',' << format_double(row.det) << ',' << format_double(row.defect) << ','
        << format_double(row.tail) << ',' << row.status << "\n";
    if (row.status == "ok") {
      max_defect = std::max(max_defect, row.defect);
      max_dev = std::max(max_dev, inf_norm(Vec(row.h - row.x)));
      min_det = std::min(min_det, row.det);
    } else {
      ++errors;
    }
  }
  write_text_file(dir / "conjugacy.csv", csv.str());

  double h_bound = 4.0 * est.K * est.mu / est.alpha + cfg.trunc.tail_tol;
  bool defect_pass = errors == 0 && max_defect <= 1e-6;
  bool bound_pass = errors == 0 && max_dev <= h_bound;
  bool det_pass = errors == 0 && min_det > 0;
  ordered_json summary{{"system", sys.name},
                       {"K", est.K},
                       {"alpha", est.alpha},
                       {"mu", est.mu},
                       {"rows", rows.size()},
                       {"errors", errors},
                       {"max_defect", max_defect},
                       {"defect_threshold", 1e-6},
                       {"defect_pass", defect_pass},
                       {"max_h_minus_id", max_dev},
                       {"h_bound", h_bound},
                       {"h_bound_pass", bound_pass},
                       {"min_detDH", min_det},
                       {"detDH_positive", det_pass}};
  if (est.estimated) summary["dichotomy_fit"] = fit_json(est.fit);
  write_json_file(dir / "conjugacy_summary.json", summary);

  std::cout << "conjugacy: " << sys.name << "\n";
  print_kv("rows", std::to_string(rows.size()));
  print_kv("max defect", format_double(max_defect));
  print_kv("max |H - id|", format_double(max_dev) + " (bound " + format_double(h_bound) + ")");
  print_kv("min det DH", format_double(min_det));
  print_kv("csv", (dir / "conjugacy.csv").string());

  bool ok = defect_pass && bound_pass && det_pass;
  return ok ? 0 : (cfg.strict ? 1 : 0);
}

int cmd_density(RunConfig cfg) {
  SystemDef sys = make_system(cfg);
  auto dir = ensure_output_dir(cfg);
  Estimates est = make_estimates(sys, cfg);
  DensityPair dp = make_density_pair(sys, est.K, est.alpha, est.mu, cfg.grid, -1, cfg.trunc,
                                     cfg.integrator);
  const int n = sys.n;

  std::vector<double> ts = cfg.grid.t_values();
  std::vector<Vec> xs = cfg.grid.x_values();
  struct Row {
    double t = 0;
    Vec x;
    double rho = 0, div = 0;
    bool pass = false;
    std::string status = "ok";
  };
  std::vector<Row> rows(ts.size() * xs.size());
  parallel_for(rows.size(), [&](std::size_t idx) {
    Row& row = rows[idx];
    row.t = ts[idx / xs.size()];
    row.x = xs[idx % xs.size()];
    if (inf_norm(row.x) == 0) {
      row.status = "skipped:origin";  // density domain excludes x = 0
      return;
    }
    try {
      row.rho = rho_bar(dp, sys, row.t, row.x);
      DivergenceCheck chk = rho_bar_divergence_check(dp, sys, row.t, row.x);
      row.div = chk.value;
      row.pass = row.rho > 0 && chk.value > 0 && chk.routes_agree;
      if (!std::isfinite(row.rho) || !std::isfinite(row.div)) {
        row = Row{row.t, row.x, 0, 0, false, "error:nonfinite"};
      }
    } catch (const Error& e) {
      row = Row{row.t, row.x, 0, 0, false, "error:" + sanitize(e.what())};
    }
  });

  std::ostringstream csv;
  csv << "t";
  for (int d = 1; d <= n; ++d) csv << ",x" << d;
  csv << ",rho_bar,divergence,pass,status\n";
  double min_div = std::numeric_limits<double>::infinity();
  double min_rho = std::numeric_limits<double>::infinity();
  std::size_t errors = 0, skipped = 0;
  bool rows_pass = true;
  for (const Row& row : rows) {
    csv << format_double(row.t);
    for (int d = 0; d < n; ++d) csv << ',' << format_double(row.x[d]);
    csv << ',' << format_double(row.rho) << ',' << format_double(row.div) << ','
        << (row.pass ? 1 : 0) << ',' << row.status << "\n";
    if (row.status == "ok") {
      min_div = std::min(min_div, row.div);
      min_rho = std::min(min_rho, row.rho);
      rows_pass = rows_pass && row.pass;
    } else if (row.status == "skipped:origin") {
      ++skipped;
    } else {
      ++errors;
    }
  }
  write_text_file(dir / "density.csv", csv.str());

  ordered_json summary{{"system", sys.name},
                       {"beta", dp.linear.beta()},
                       {"horizon", dp.linear.horizon()},
                       {"quadrature_tail", dp.linear.tail_bound()},
                       {"rows", rows.size()},
                       {"skipped_origin", skipped},
                       {"errors", errors},
                       {"min_divergence", min_div},
                       {"min_rho_bar", min_rho},
                       {"rows_pass", rows_pass}};
  if (skipped > 0) summary["note"] = "x = 0 rows are outside the density domain and were skipped";

  bool integ_ok = true;
  try {
    double t0 = std::clamp(0.0, cfg.grid.t_range[0], cfg.grid.t_range[1]);
    IntegrabilityResult ir = integrability_check(dp, sys, t0, 1.0, 16.0);
    integ_ok = ir.pass;
    summary["integrability"] = ordered_json{{"t", t0},
                                            {"radii", ir.radii},
                                            {"increments", ir.increments},
                                            {"ratios", ir.ratios},
                                            {"expected_ratio", ir.expected_ratio},
                                            {"tail_estimate", ir.tail_estimate},
                                            {"value", ir.value},
                                            {"pass", ir.pass}};
  } catch (const CapabilityError& e) {
    summary["integrability"] = ordered_json{{"skipped", e.what()}};
  }
  write_json_file(dir / "density_summary.json", summary);

  std::cout << "density: " << sys.name << "\n";
  print_kv("beta", format_double(dp.linear.beta()));
  print_kv("rows", std::to_string(rows.size()));
  print_kv("min divergence", format_double(min_div));
  print_kv("integrability", integ_ok ? "pass" : "fail");
  print_kv("csv", (dir / "density.csv").string());

  bool ok = errors == 0 && rows_pass && integ_ok;
  return ok ? 0 : (cfg.strict ? 1 : 0);
}

int cmd_sweep(RunConfig cfg) {
  int a = cmd_conjugacy(cfg);
  int b = cmd_density(cfg);
  return std::max(a, b);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"conjugacy and density toolkit for uniformly stable quasilinear systems"};
  std::string command, config_path, out_dir;
  bool strict = false;
  app.add_option("command", command, "task to run")
      ->check(CLI::IsMember({"check", "conjugacy", "density", "sweep"}));
  app.add_option("--config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_flag("--strict", strict, "fail the run on uncertified or failed checks");
  app.add_option("--out", out_dir, "override the configured output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  cfg.strict = cfg.strict || strict;
  if (!out_dir.empty()) cfg.output_dir = out_dir;

  std::vector<std::string> tasks = command.empty() ? cfg.tasks : std::vector<std::string>{command};
  if (tasks.empty()) {
    std::cerr << "config error: no tasks requested\n";
    return 2;
  }
  int code = 0;
  for (const std::string& task : tasks) {
    int c = 0;
    try {
      if (task == "check") {
        c = cmd_check(cfg);
      } else if (task == "conjugacy") {
        c = cmd_conjugacy(cfg);
      } else if (task == "density") {
        c = cmd_density(cfg);
      } else {
        c = cmd_sweep(cfg);
      }
    } catch (const ValidationError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      c = 2;
    } catch (const std::exception& e) {
      std::cerr << "numerical failure in '" << task << "': " << e.what() << "\n";
      c = 3;
    }
    code = std::max(code, c);
  }
  return code;
}

}  // namespace palmer
