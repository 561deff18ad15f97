#pragma once

#include "fvlab/mechanisms.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fvlab {

/// Invalid or incomplete configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FieldType { number, integer, text, number_list, integer_list, object };

struct ConfigField {
  std::string name;  // JSON key; the CLI flag is --name with '_' replaced by '-'
  FieldType type;
  std::string help;
};

/// Every recognised configuration key.
const std::vector<ConfigField>& config_fields();

struct ExperimentConfig {
  std::string experiment;
  std::string mechanism = "feller";  // "feller" or "stable"
  double sigma2 = 2.0;
  double beta = 1.0;
  double alpha = 1.5;
  double c = 1.0;
  double cprime = 1.0;
  /// Unset: derived from the mechanism by theorem1_correspondence.
  std::optional<CoalescentM> coalescent;

  std::int64_t n_paths = 10000;
  std::int64_t replicates = 10000;
  double x0 = 1.0;
  double horizon = 1.0;
  double dt = 0.01;
  double clock_increment = 0.0;
  double eps_trunc = 0.01;
  double eps_abs = 1e-4;
  std::uint64_t seed = 0;
  std::string output_dir;
  int threads = 0;

  std::vector<double> times{0.5, 1.0};
  std::vector<int> powers{1, 2};
  int cells = 10;
  int n = 10;  // sample size (coalescent), particle count (gfvi) or n_max (rates)

  double t0 = 0.5;  // independence: real time of the clock
  double s0 = 0.5;  // independence: clock time of the ratio process
  std::vector<double> feller_ratios{0.25, 0.75};  // extinction: beta / sigma2
  std::vector<double> stable_ratios{0.2, 0.5};    // extinction: cprime / c

  std::string suite = "all";  // genlab
  int samples = 50;           // genlab

  Mechanism make_mechanism() const;
  CoalescentM make_coalescent() const;
  nlohmann::json to_json() const;
};

/// Command defaults, then the config file, then flag overrides (each a JSON
/// object). Unknown keys, wrong types, out-of-range values and a missing seed
/// raise ConfigError.
ExperimentConfig resolve_config(const std::string& command, const nlohmann::json& file,
                                const nlohmann::json& flags);

/// Converts a flag string to JSON according to the field's type.
nlohmann::json parse_flag_value(const ConfigField& field, const std::string& text);

struct Criterion {
  std::string name;
  bool passed = false;
  bool inconclusive = false;
  nlohmann::json details;
};

struct VerdictReport {
  std::string experiment;
  std::vector<Criterion> criteria;
  std::vector<std::string> notes;
  nlohmann::json config;
  double runtime_seconds = 0.0;  // reported on stderr, not serialised

  /// "fail" if any criterion failed, else "inconclusive" if any was, else "pass".
  std::string status() const;
  /// 0 pass, 1 fail, 2 inconclusive.
  int exit_code() const;
  nlohmann::json to_json() const;
};

VerdictReport verify_theorem1(const ExperimentConfig& cfg);
VerdictReport verify_fixed_time(const ExperimentConfig& cfg);
VerdictReport verify_independence(const ExperimentConfig& cfg);
VerdictReport verify_extinction(const ExperimentConfig& cfg);

struct CommandOutput {
  std::map<std::string, std::string> files;  // file name -> contents
  int exit_code = 0;
  double runtime_seconds = 0.0;
};

/// Runs any command: verify-theorem1, verify-fixed-time, verify-independence,
/// verify-extinction, rates, genlab, sim-feller, sim-stable, sim-flow,
/// sim-gfvi, coalescent.
CommandOutput run_command(const std::string& command, const ExperimentConfig& cfg);

const std::vector<std::string>& command_names();

}  // namespace fvlab
