#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "gbc/core.hpp"
#include "gbc/simulation.hpp"

namespace gbc::cli {

/// Parameters of every subcommand. Each field has a key used both as the
/// long flag (`--key`) and in the config file (`key = value`).
struct RunConfig {
  std::uint64_t seed = 1;
  int replicates = 1;
  int threads = 1;
  bool verbose = false;

  SimulationConfig sim;
  Hyperparameters hyper;
  int thin = 1;
  std::string init = "prior-centred";

  std::string data_dir;
  std::string expression;
  std::string outcome;
  std::string outcome_kind = "continuous";
  std::string outcome_column;
  std::string time_column = "time";
  std::string event_column = "event";
  std::string continuous_measure = "r2";
  std::string guidance_file;
  bool no_guidance = false;
  double filter_fraction = 0.0;

  double fdr = 0.001;
  long top_m = 0;
  std::string bic_penalty = "genes";
  bool save_draws = false;
  int k_min = 2;
  int k_max = 6;

  std::string fit_dir;
  std::string truth;
  std::string reference_labels;

  std::string sweep_axis = "a_tau_mu0";
  int sweep_points = 10;
  double sweep_min = std::numeric_limits<double>::quiet_NaN();
  double sweep_max = std::numeric_limits<double>::quiet_NaN();

  std::string out;
};

using FieldRef = std::variant<double*, int*, long*, std::uint64_t*, bool*, std::string*>;

struct Field {
  std::string key;
  FieldRef ref;
  std::string help;
};

/// Field table bound to `config`, in the order used by the config file.
std::vector<Field> fields(RunConfig& config);

/// `key = value` lines; `#` starts a comment. Keys not in the field table are
/// a usage error. Values are applied on top of `base`.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
std::string to_config_text(const RunConfig& config, const std::string& command);

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 success, 1 usage, 2 data or validation, 3 numerical.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gbc::cli
