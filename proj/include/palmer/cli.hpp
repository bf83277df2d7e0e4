#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "palmer/density.hpp"

namespace palmer {

// One batch run: a preset system, the verification grids, tolerances, and
// which tasks to execute. Loaded from a flat-key JSON file; preset parameters
// live under "params", optional constant overrides under flat K/alpha/mu/gamma.
struct RunConfig {
  std::string system = "example4";
  std::map<std::string, double> scalar_params;
  std::map<std::string, std::vector<double>> vector_params;
  GridSpec grid;
  TruncationConfig trunc;
  IntegratorConfig integrator;
  std::vector<std::string> tasks{"check"};
  std::string output_dir = "out";
  std::uint64_t seed = 12345;
  bool strict = false;
  Overrides overrides;
};

// Parses and validates the JSON config; unknown keys are errors so typos
// cannot silently fall back to defaults.
RunConfig load_config(const std::string& path);

// Preset dispatch; fills an empty x_box with the preset's dimension.
SystemDef make_system(RunConfig& cfg);

// Locale-independent shortest-faithful formatting at 12 significant digits;
// every number in a CSV or report goes through here.
std::string format_double(double v);

// Exit codes: 0 ok, 1 certification failure, 2 config error, 3 numerics.
int cmd_check(RunConfig cfg);
int cmd_conjugacy(RunConfig cfg);
int cmd_density(RunConfig cfg);
int cmd_sweep(RunConfig cfg);

int run_cli(int argc, const char* const* argv);

}  // namespace palmer
