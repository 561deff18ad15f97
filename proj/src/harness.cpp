#include "fvlab/harness.hpp"

#include "fvlab/cbi_sim.hpp"
#include "fvlab/coalescent.hpp"
#include "fvlab/genlab.hpp"
#include "fvlab/gfvi_sim.hpp"
#include "fvlab/parallel.hpp"
#include "fvlab/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

namespace fvlab {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTheorem1Tag = 0x7468656f72656d31ull;
constexpr std::uint64_t kFixedForwardTag = 0x6669786564667764ull;
constexpr std::uint64_t kFixedOuterTag = 0x66697865646f7574ull;
constexpr std::uint64_t kIndependenceTag = 0x696e646570656e64ull;
constexpr std::uint64_t kExtinctionTag = 0x657874696e637469ull;
constexpr std::uint64_t kDualTag = 0x6475616c2d6d6300ull;
constexpr std::uint64_t kSimTag = 0x73696d2d70617468ull;
constexpr double kExtinctionSeparation = 0.5;
constexpr double kIndependenceLevel = 0.01;

const std::set<std::string> kStableKeys{"alpha", "c", "cprime"};

json command_defaults(const std::string& command) {
  if (command == "verify-theorem1")
    return {{"n_paths", 10000}, {"replicates", 10000}, {"horizon", 1e12}, {"dt", 1e6},
            {"clock_increment", 0.002}, {"eps_trunc", 0.01}};
  if (command == "verify-fixed-time")
    return {{"mechanism", "feller"}, {"sigma2", 2.0}, {"beta", 2.0}, {"n_paths", 10000},
            {"replicates", 1000}, {"dt", 0.01}, {"clock_increment", 0.002}};
  if (command == "verify-independence")
    return {{"sigma2", 2.0}, {"beta", 2.0}, {"n_paths", 10000}, {"horizon", 1e12},
            {"dt", 1e6}, {"clock_increment", 0.002}, {"eps_trunc", 0.01}};
  if (command == "verify-extinction")
    return {{"sigma2", 1.0}, {"c", 1.0}, {"n_paths", 10000}, {"horizon", 20.0}, {"dt", 0.05},
            {"clock_increment", 0.01}, {"eps_trunc", 0.01}, {"eps_abs", 1e-4}};
  if (command == "rates") return {{"n", 16}};
  if (command == "genlab") return {{"samples", 50}};
  if (command == "sim-feller") return {{"mechanism", "feller"}, {"n_paths", 10}};
  if (command == "sim-stable") return {{"mechanism", "stable"}, {"n_paths", 10}};
  if (command == "sim-flow") return {{"n_paths", 10}};
  if (command == "sim-gfvi") return {{"n", 1000}, {"replicates", 10}, {"eps_trunc", 1e-3}};
  if (command == "coalescent") return {{"n", 10}, {"replicates", 10}};
  throw ConfigError("unknown command '" + command + "'");
}

const ConfigField& field_named(const std::string& key) {
  for (const auto& f : config_fields())
    if (f.name == key) return f;
  throw ConfigError("unknown field '" + key + "'");
}

void check_type(const ConfigField& f, const json& v) {
  const auto bad = [&](const char* want) {
    throw ConfigError("field '" + f.name + "': expected " + want + ", got " + v.dump());
  };
  switch (f.type) {
    case FieldType::number:
      if (!v.is_number()) bad("a number");
      break;
    case FieldType::integer:
      if (!v.is_number_integer()) bad("an integer");
      break;
    case FieldType::text:
      if (!v.is_string()) bad("a string");
      break;
    case FieldType::number_list:
      if (!v.is_array()) bad("a list of numbers");
      for (const auto& x : v)
        if (!x.is_number()) bad("a list of numbers");
      break;
    case FieldType::integer_list:
      if (!v.is_array()) bad("a list of integers");
      for (const auto& x : v)
        if (!x.is_number_integer()) bad("a list of integers");
      break;
    case FieldType::object:
      if (!v.is_object() && !(v.is_string() && v.get<std::string>() == "derive"))
        bad("an object or \"derive\"");
      break;
  }
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError("field '" + field + "': " + what);
}

BetaLambda beta_part(const json& j, const std::string& field) {
  BetaLambda b;
  for (const auto& [k, v] : j.items()) {
    require(v.is_number(), field + "." + k, "expected a number");
    if (k == "a") b.a = v.get<double>();
    else if (k == "b") b.b = v.get<double>();
    else if (k == "scale") b.scale = v.get<double>();
    else throw ConfigError("unknown field '" + field + "." + k + "'");
  }
  return b;
}

CoalescentM coalescent_from_json(const json& j) {
  CoalescentM m;
  for (const auto& [k, v] : j.items()) {
    if (k == "c0" || k == "c1") {
      require(v.is_number(), "coalescent." + k, "expected a number");
      (k == "c0" ? m.c0 : m.c1) = v.get<double>();
    } else if (k == "nu0" || k == "nu1") {
      require(v.is_object(), "coalescent." + k, "expected an object {a, b, scale}");
      (k == "nu0" ? m.nu0 : m.nu1) = beta_part(v, "coalescent." + k);
    } else {
      throw ConfigError("unknown field 'coalescent." + k + "'");
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("field 'coalescent': ") + e.what());
  }
  return m;
}

json coalescent_to_json(const CoalescentM& m) {
  json j{{"c0", m.c0}, {"c1", m.c1}};
  if (m.nu0) j["nu0"] = {{"a", m.nu0->a}, {"b", m.nu0->b}, {"scale", m.nu0->scale}};
  if (m.nu1) j["nu1"] = {{"a", m.nu1->a}, {"b", m.nu1->b}, {"scale", m.nu1->scale}};
  return j;
}

json estimate_json(const Estimate& e) {
  return {{"mean", e.mean},
          {"std_error", e.std_error},
          {"ci99_low", e.ci_low()},
          {"ci99_high", e.ci_high()},
          {"samples", e.samples}};
}

double z_score(const Estimate& a, const Estimate& b) {
  const double s = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  if (s == 0.0) return a.mean == b.mean ? 0.0 : INFINITY;
  return (a.mean - b.mean) / s;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

Criterion moment_criterion(const std::string& name, double t, int p, const Estimate& fwd,
                           const Estimate& oracle, const std::string& source, std::int64_t unresolved) {
  Criterion c;
  c.name = name;
  c.inconclusive = unresolved > 0;
  c.passed = !c.inconclusive && within_sigma(fwd, oracle, kThreeSigma);
  c.details = {{"t", t},
               {"p", p},
               {"forward", estimate_json(fwd)},
               {"oracle", {{"value", oracle.mean}, {"std_error", oracle.std_error}, {"source", source}}},
               {"z", finite_or_null(z_score(fwd, oracle))},
               {"tolerance_sigma", kThreeSigma},
               {"unresolved_paths", unresolved}};
  return c;
}

std::string t_label(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

int max_power(const std::vector<int>& powers) {
  return std::max(2, *std::max_element(powers.begin(), powers.end()));
}

FlowOptions flow_options(const ExperimentConfig& cfg) {
  FlowOptions o;
  o.cells = cfg.cells;
  o.horizon = cfg.horizon;
  o.steps = StepControl{cfg.dt, cfg.clock_increment, 1e-12};
  o.eps_trunc = cfg.eps_trunc;
  return o;
}

double immigrant_fraction(const AtomicMeasure& m) {
  const double z = m.total_mass();
  return z > 0.0 ? m.immigrant_mass / z : NAN;
}

template <class F>
VerdictReport timed(const ExperimentConfig& cfg, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  VerdictReport r = body();
  r.experiment = cfg.experiment;
  r.config = cfg.to_json();
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields{
      {"experiment", FieldType::text, "experiment name (defaults to the command)"},
      {"mechanism", FieldType::text, "feller or stable"},
      {"sigma2", FieldType::number, "Feller diffusion coefficient"},
      {"beta", FieldType::number, "Feller immigration rate"},
      {"alpha", FieldType::number, "stable index in (1, 2)"},
      {"c", FieldType::number, "stable branching Levy density constant"},
      {"cprime", FieldType::number, "stable immigration Levy density constant"},
      {"coalescent", FieldType::object, "\"derive\" or {c0, c1, nu0: {a, b, scale}, nu1: {...}}"},
      {"n_paths", FieldType::integer, "forward Monte Carlo paths"},
      {"replicates", FieldType::integer, "dual / outer / simulator replicates"},
      {"x0", FieldType::number, "initial total mass of scalar paths"},
      {"horizon", FieldType::number, "time horizon"},
      {"dt", FieldType::number, "(maximum) time step"},
      {"clock_increment", FieldType::number, "bound on the clock increment per step (0: fixed dt)"},
      {"eps_trunc", FieldType::number, "jump truncation level"},
      {"eps_abs", FieldType::number, "absorption threshold for hitting statistics"},
      {"seed", FieldType::integer, "random seed (required)"},
      {"output_dir", FieldType::text, "directory for output files (default: stdout)"},
      {"threads", FieldType::integer, "worker threads (0: hardware concurrency)"},
      {"times", FieldType::number_list, "observation times"},
      {"powers", FieldType::integer_list, "moment orders p"},
      {"cells", FieldType::integer, "cells of (0, 1] in the flow"},
      {"n", FieldType::integer, "sample size / particle count / rate table size"},
      {"t0", FieldType::number, "independence: real time for C(t0)"},
      {"s0", FieldType::number, "independence: clock time for R at C^-1(s0)"},
      {"feller_ratios", FieldType::number_list, "extinction: beta / sigma2 below and above 1/2"},
      {"stable_ratios", FieldType::number_list,
       "extinction: cprime / c below and above (alpha - 1) / alpha"},
      {"suite", FieldType::text, "genlab suite: all, gateaux, factorization, pushforward"},
      {"samples", FieldType::integer, "genlab random suite size"},
  };
  return fields;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{
      "verify-theorem1", "verify-fixed-time", "verify-independence", "verify-extinction",
      "rates",           "genlab",            "sim-feller",          "sim-stable",
      "sim-flow",        "sim-gfvi",          "coalescent"};
  return names;
}

Mechanism ExperimentConfig::make_mechanism() const {
  try {
    if (mechanism == "feller") return Mechanism::feller(sigma2, beta);
    return Mechanism::stable(alpha, c, cprime);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mechanism parameters: ") + e.what());
  }
}

CoalescentM ExperimentConfig::make_coalescent() const {
  return coalescent ? *coalescent : theorem1_correspondence(make_mechanism());
}

json ExperimentConfig::to_json() const {
  return {{"experiment", experiment},
          {"mechanism", mechanism},
          {"sigma2", sigma2},
          {"beta", beta},
          {"alpha", alpha},
          {"c", c},
          {"cprime", cprime},
          {"coalescent", coalescent ? coalescent_to_json(*coalescent) : json("derive")},
          {"n_paths", n_paths},
          {"replicates", replicates},
          {"x0", x0},
          {"horizon", horizon},
          {"dt", dt},
          {"clock_increment", clock_increment},
          {"eps_trunc", eps_trunc},
          {"eps_abs", eps_abs},
          {"seed", seed},
          {"output_dir", output_dir},
          {"threads", threads},
          {"times", times},
          {"powers", powers},
          {"cells", cells},
          {"n", n},
          {"t0", t0},
          {"s0", s0},
          {"feller_ratios", feller_ratios},
          {"stable_ratios", stable_ratios},
          {"suite", suite},
          {"samples", samples}};
}

json parse_flag_value(const ConfigField& field, const std::string& text) {
  const auto fail = [&]() -> json {
    throw ConfigError("flag --" + field.name + ": cannot parse '" + text + "'");
  };
  const auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      fail();
    }
    if (used != s.size()) fail();
    return v;
  };
  const auto integer = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      fail();
    }
    if (used != s.size()) fail();
    return v;
  };
  const auto split = [&]() {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  switch (field.type) {
    case FieldType::number: return number(text);
    case FieldType::integer: return integer(text);
    case FieldType::text: return text;
    case FieldType::number_list: {
      json a = json::array();
      for (const auto& s : split()) a.push_back(number(s));
      return a;
    }
    case FieldType::integer_list: {
      json a = json::array();
      for (const auto& s : split()) a.push_back(integer(s));
      return a;
    }
    case FieldType::object: {
      if (text == "derive") return text;
      json j = json::parse(text, nullptr, false);
      if (j.is_discarded()) fail();
      return j;
    }
  }
  return fail();
}

ExperimentConfig resolve_config(const std::string& command, const json& file, const json& flags) {
  json merged = command_defaults(command);
  const bool fixed_mechanism = merged.contains("mechanism") &&
                               (command == "sim-feller" || command == "sim-stable");
  bool stable_hint = false, explicit_mechanism = false;
  for (const json* src : {&file, &flags}) {
    if (src->is_null()) continue;
    if (!src->is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [k, v] : src->items()) {
      check_type(field_named(k), v);
      if (k == "mechanism") explicit_mechanism = true;
      if (kStableKeys.count(k)) stable_hint = true;
      merged[k] = v;
    }
  }
  if (fixed_mechanism && explicit_mechanism && merged["mechanism"] != command_defaults(command)["mechanism"])
    throw ConfigError("field 'mechanism': " + command + " fixes the mechanism");
  if (fixed_mechanism) merged["mechanism"] = command_defaults(command)["mechanism"];
  else if (!explicit_mechanism && !merged.contains("mechanism") && stable_hint) merged["mechanism"] = "stable";

  ExperimentConfig cfg;
  cfg.experiment = command;
  if (!merged.contains("seed")) throw ConfigError("missing required field 'seed'");
  for (const auto& [k, v] : merged.items()) {
    if (k == "experiment") cfg.experiment = v.get<std::string>();
    else if (k == "mechanism") cfg.mechanism = v.get<std::string>();
    else if (k == "sigma2") cfg.sigma2 = v.get<double>();
    else if (k == "beta") cfg.beta = v.get<double>();
    else if (k == "alpha") cfg.alpha = v.get<double>();
    else if (k == "c") cfg.c = v.get<double>();
    else if (k == "cprime") cfg.cprime = v.get<double>();
    else if (k == "coalescent") {
      if (v.is_object()) cfg.coalescent = coalescent_from_json(v);
    } else if (k == "n_paths") cfg.n_paths = v.get<std::int64_t>();
    else if (k == "replicates") cfg.replicates = v.get<std::int64_t>();
    else if (k == "x0") cfg.x0 = v.get<double>();
    else if (k == "horizon") cfg.horizon = v.get<double>();
    else if (k == "dt") cfg.dt = v.get<double>();
    else if (k == "clock_increment") cfg.clock_increment = v.get<double>();
    else if (k == "eps_trunc") cfg.eps_trunc = v.get<double>();
    else if (k == "eps_abs") cfg.eps_abs = v.get<double>();
    else if (k == "seed") {
      require(v.is_number_unsigned() || v.get<std::int64_t>() >= 0, "seed", "must be >= 0");
      cfg.seed = v.get<std::uint64_t>();
    } else if (k == "output_dir") cfg.output_dir = v.get<std::string>();
    else if (k == "threads") cfg.threads = v.get<int>();
    else if (k == "times") cfg.times = v.get<std::vector<double>>();
    else if (k == "powers") cfg.powers = v.get<std::vector<int>>();
    else if (k == "cells") cfg.cells = v.get<int>();
    else if (k == "n") cfg.n = v.get<int>();
    else if (k == "t0") cfg.t0 = v.get<double>();
    else if (k == "s0") cfg.s0 = v.get<double>();
    else if (k == "feller_ratios") cfg.feller_ratios = v.get<std::vector<double>>();
    else if (k == "stable_ratios") cfg.stable_ratios = v.get<std::vector<double>>();
    else if (k == "suite") cfg.suite = v.get<std::string>();
    else if (k == "samples") cfg.samples = v.get<int>();
  }

  require(cfg.mechanism == "feller" || cfg.mechanism == "stable", "mechanism",
          "must be \"feller\" or \"stable\"");
  cfg.make_mechanism();
  if (command == "verify-independence" || command == "verify-extinction") {
    try {
      Mechanism::feller(cfg.sigma2, cfg.beta);
      Mechanism::stable(cfg.alpha, cfg.c, cfg.cprime);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mechanism parameters: ") + e.what());
    }
  }
  require(cfg.n_paths >= 1, "n_paths", "must be >= 1");
  require(cfg.replicates >= 1, "replicates", "must be >= 1");
  require(cfg.x0 >= 0.0, "x0", "must be >= 0");
  require(cfg.horizon > 0.0 && std::isfinite(cfg.horizon), "horizon", "must be a positive number");
  require(cfg.dt > 0.0, "dt", "must be > 0");
  require(cfg.clock_increment >= 0.0, "clock_increment", "must be >= 0");
  require(cfg.eps_trunc > 0.0 && cfg.eps_trunc < 1.0, "eps_trunc", "must lie in (0, 1)");
  require(cfg.eps_abs > 0.0, "eps_abs", "must be > 0");
  require(cfg.threads >= 0, "threads", "must be >= 0");
  require(!cfg.times.empty(), "times", "must not be empty");
  for (double t : cfg.times) require(t >= 0.0 && std::isfinite(t), "times", "entries must be >= 0");
  require(std::is_sorted(cfg.times.begin(), cfg.times.end()), "times", "must be sorted");
  require(!cfg.powers.empty(), "powers", "must not be empty");
  for (int p : cfg.powers) require(p >= 1 && p <= 12, "powers", "entries must lie in 1..12");
  require(cfg.cells >= 1, "cells", "must be >= 1");
  require(cfg.n >= 1, "n", "must be >= 1");
  require(cfg.t0 > 0.0 && cfg.s0 > 0.0, cfg.t0 > 0.0 ? "s0" : "t0", "must be > 0");
  require(cfg.feller_ratios.size() == 2, "feller_ratios", "must have two entries");
  require(cfg.stable_ratios.size() == 2, "stable_ratios", "must have two entries");
  require(cfg.suite == "all" || cfg.suite == "gateaux" || cfg.suite == "factorization" ||
              cfg.suite == "pushforward",
          "suite", "must be all, gateaux, factorization or pushforward");
  require(cfg.samples >= 1, "samples", "must be >= 1");
  if (command == "rates") require(cfg.n >= 2 && cfg.n <= 64, "n", "must lie in 2..64 for rates");
  if (command == "sim-gfvi") require(cfg.n >= 2, "n", "must be >= 2 particles");
  if (command == "sim-gfvi")
    for (double t : cfg.times) require(t <= cfg.horizon, "times", "entries must not exceed horizon");
  if (command == "verify-fixed-time" || command == "verify-theorem1" ||
      command == "verify-independence")
    require(cfg.clock_increment > 0.0 || command == "verify-fixed-time", "clock_increment",
            "must be > 0 for time-changed experiments");
  return cfg;
}

std::string VerdictReport::status() const {
  bool inconclusive = false;
  for (const auto& c : criteria) {
    if (c.inconclusive) inconclusive = true;
    else if (!c.passed) return "fail";
  }
  return inconclusive ? "inconclusive" : "pass";
}

int VerdictReport::exit_code() const {
  const auto s = status();
  return s == "pass" ? 0 : s == "fail" ? 1 : 2;
}

json VerdictReport::to_json() const {
  json cs = json::array();
  for (const auto& c : criteria)
    cs.push_back({{"name", c.name},
                  {"status", c.inconclusive ? "inconclusive" : c.passed ? "pass" : "fail"},
                  {"details", c.details}});
  return {{"experiment", experiment}, {"status", status()}, {"criteria", cs},
          {"notes", notes},           {"config", config}};
}

VerdictReport verify_theorem1(const ExperimentConfig& cfg) {
  return timed(cfg, [&] {
    const Mechanism mech = cfg.make_mechanism();
    const CoalescentM m = cfg.make_coalescent();
    const RateTable table = rates(m, max_power(cfg.powers));
    const double t_max = cfg.times.back();

    FlowOptions o = flow_options(cfg);
    o.stop_clock = t_max;
    struct Sample {
      bool resolved = true;
      std::vector<double> r;
    };
    std::vector<Sample> samples(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(samples.size(), [&](std::size_t i) {
      auto& s = samples[i];
      s.r.assign(cfg.times.size(), 0.0);
      if (t_max == 0.0) return;
      Stream rng(cfg.seed, derive_stream_id(kTheorem1Tag, i));
      const FlowPath flow = sim_flow(mech, o, rng);
      for (std::size_t k = 0; k < cfg.times.size(); ++k) {
        if (cfg.times[k] == 0.0) continue;
        const auto idx = inverse_clock_index(flow.clock, cfg.times[k]);
        const double r = idx ? immigrant_fraction(flow.measures[*idx]) : NAN;
        if (std::isnan(r)) {
          s.resolved = false;
          return;
        }
        s.r[k] = r;
      }
    });

    std::int64_t unresolved = 0;
    for (const auto& s : samples) unresolved += s.resolved ? 0 : 1;

    VerdictReport rep;
    const bool exact = mech.is_feller();
    for (std::size_t k = 0; k < cfg.times.size(); ++k) {
      const double t = cfg.times[k];
      for (int p : cfg.powers) {
        RunningStats fwd;
        for (const auto& s : samples)
          if (s.resolved) fwd.push(std::pow(s.r[k], p));
        const double chain = absorption_chain(p, table, t);
        Estimate oracle{chain, 0.0, 0};
        std::string source = "absorption_chain";
        if (!exact) {
          const auto seed = derive_stream_id(cfg.seed ^ kDualTag, k * 64 + static_cast<std::size_t>(p));
          oracle = absorption_monte_carlo(p, table, t, cfg.replicates, seed);
          source = "absorption_monte_carlo";
        }
        auto c = moment_criterion("duality t=" + t_label(t) + " p=" + std::to_string(p), t, p,
                                  estimate(fwd), oracle, source, unresolved);
        c.details["absorption_chain"] = chain;
        rep.criteria.push_back(std::move(c));
      }
    }
    if (unresolved > 0)
      rep.notes.push_back(std::to_string(unresolved) + " of " + std::to_string(cfg.n_paths) +
                          " paths did not resolve C^-1(t) before the horizon or extinction");
    return rep;
  });
}

VerdictReport verify_fixed_time(const ExperimentConfig& cfg) {
  if (cfg.mechanism != "feller")
    throw ConfigError("field 'mechanism': the fixed-time genealogy check exists only for the Feller case");
  if (cfg.beta / cfg.sigma2 < 0.5)
    throw ConfigError("fields 'beta', 'sigma2': the fixed-time identity assumes beta / sigma2 >= 1/2 (got " +
                      t_label(cfg.beta / cfg.sigma2) + ")");
  return timed(cfg, [&] {
    const Mechanism mech = cfg.make_mechanism();
    const RateTable table = rates(cfg.make_coalescent(), max_power(cfg.powers));
    VerdictReport rep;
    for (std::size_t k = 0; k < cfg.times.size(); ++k) {
      const double t = cfg.times[k];
      std::vector<double> fwd_r(static_cast<std::size_t>(cfg.n_paths), 0.0);
      std::vector<double> clocks(static_cast<std::size_t>(cfg.replicates), 0.0);
      if (t > 0.0) {
        FlowOptions o = flow_options(cfg);
        o.horizon = t;
        parallel_for(fwd_r.size(), [&](std::size_t i) {
          Stream rng(cfg.seed, derive_stream_id(kFixedForwardTag + k, i));
          fwd_r[i] = immigrant_fraction(sim_flow(mech, o, rng).measures.back());
        });
        parallel_for(clocks.size(), [&](std::size_t i) {
          Stream rng(cfg.seed, derive_stream_id(kFixedOuterTag + k, i));
          clocks[i] = sim_flow(mech, o, rng).clock.back();
        });
      }
      for (int p : cfg.powers) {
        RunningStats fwd, nested;
        for (double r : fwd_r) fwd.push(std::pow(r, p));
        for (double ct : clocks) nested.push(absorption_chain(p, table, ct));
        rep.criteria.push_back(moment_criterion("fixed_time t=" + t_label(t) + " p=" + std::to_string(p),
                                                t, p, estimate(fwd), estimate(nested),
                                                "absorption_chain at independent C(t)", 0));
      }
    }
    return rep;
  });
}

VerdictReport verify_independence(const ExperimentConfig& cfg) {
  return timed(cfg, [&] {
    VerdictReport rep;
    const Mechanism cases[2] = {Mechanism::feller(cfg.sigma2, cfg.beta),
                                Mechanism::stable(cfg.alpha, cfg.c, cfg.cprime)};
    for (int which = 0; which < 2; ++which) {
      const Mechanism& mech = cases[which];
      FlowOptions o = flow_options(cfg);
      o.stop_clock = cfg.s0;
      o.min_time = cfg.t0;
      std::vector<double> x(static_cast<std::size_t>(cfg.n_paths)), y(x.size());
      parallel_for(x.size(), [&](std::size_t i) {
        Stream rng(cfg.seed, derive_stream_id(kIndependenceTag + static_cast<std::uint64_t>(which), i));
        const FlowPath flow = sim_flow(mech, o, rng);
        const auto idx = inverse_clock_index(flow.clock, cfg.s0);
        const bool covers = flow.times.back() >= cfg.t0;
        x[i] = covers ? time_change_C(flow.total_mass_path(), flow.clock_exponent, cfg.t0) : NAN;
        y[i] = idx ? immigrant_fraction(flow.measures[*idx]) : NAN;
      });
      std::vector<double> xs, ys;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isfinite(x[i]) && std::isfinite(y[i])) {
          xs.push_back(x[i]);
          ys.push_back(y[i]);
        }
      const auto unresolved = static_cast<std::int64_t>(x.size() - xs.size());

      Criterion c;
      c.name = which == 0 ? "case_i_independent" : "case_ii_dependent";
      const Correlation corr = pearson(xs, ys);
      const ChiSquare2x2 chi = median_split_chi2(xs, ys);
      c.details = {{"mechanism", mech.describe()},
                   {"t0", cfg.t0},
                   {"s0", cfg.s0},
                   {"pairs", xs.size()},
                   {"unresolved_paths", unresolved},
                   {"pearson", {{"r", corr.r}, {"ci99_low", corr.ci_low}, {"ci99_high", corr.ci_high}}},
                   {"chi2", {{"statistic", chi.statistic}, {"p_value", chi.p_value}}},
                   {"level", kIndependenceLevel}};
      if (chi.degenerate || xs.size() < 10) {
        c.inconclusive = true;
        rep.notes.push_back(c.name + ": degenerate sample, test skipped");
      } else if (which == 0) {
        c.passed = corr.ci_low <= 0.0 && corr.ci_high >= 0.0 && chi.p_value > kIndependenceLevel;
        c.inconclusive = unresolved > 0;
      } else {
        c.passed = chi.p_value < kIndependenceLevel;
        c.inconclusive = unresolved > 0;
      }
      rep.criteria.push_back(std::move(c));
    }
    return rep;
  });
}

VerdictReport verify_extinction(const ExperimentConfig& cfg) {
  const double stable_threshold = (cfg.alpha - 1.0) / cfg.alpha;
  require(cfg.feller_ratios[0] < 0.5 && cfg.feller_ratios[1] >= 0.5, "feller_ratios",
          "must straddle 1/2 as [below, above]");
  require(cfg.stable_ratios[0] < stable_threshold && cfg.stable_ratios[1] >= stable_threshold,
          "stable_ratios", "must straddle (alpha - 1) / alpha as [below, above]");
  return timed(cfg, [&] {
    VerdictReport rep;
    HittingOptions h;
    h.x0 = cfg.x0;
    h.horizon = cfg.horizon;
    h.dt = cfg.dt;
    h.eps_abs = cfg.eps_abs;
    h.eps_trunc = cfg.eps_trunc;
    h.clock_increment = cfg.clock_increment;
    h.n_paths = cfg.n_paths;
    std::uint64_t stream = 0;
    const auto run = [&](const Mechanism& m) {
      h.seed = derive_stream_id(cfg.seed ^ kExtinctionTag, stream++);
      return hitting_zero_stats(m, h);
    };
    const auto stats_json = [](const Mechanism& m, double ratio, const HittingStats& s) {
      return json{{"mechanism", m.describe()}, {"ratio", ratio},      {"frequency", s.frequency},
                  {"ci99_low", s.ci_low},      {"ci99_high", s.ci_high}, {"hits", s.hits},
                  {"n_paths", s.n_paths}};
    };
    for (int which = 0; which < 2; ++which) {
      const auto& ratios = which == 0 ? cfg.feller_ratios : cfg.stable_ratios;
      const auto make = [&](double ratio) {
        return which == 0 ? Mechanism::feller(cfg.sigma2, ratio * cfg.sigma2)
                          : Mechanism::stable(cfg.alpha, cfg.c, ratio * cfg.c);
      };
      const Mechanism below = make(ratios[0]), above = make(ratios[1]);
      const HittingStats sb = run(below), sa = run(above);
      Criterion c;
      c.name = which == 0 ? "case_i_separation" : "case_ii_separation";
      const double sep = sb.frequency - sa.frequency;
      c.passed = sep >= kExtinctionSeparation;
      c.details = {{"threshold", which == 0 ? 0.5 : stable_threshold},
                   {"below", stats_json(below, ratios[0], sb)},
                   {"above", stats_json(above, ratios[1], sa)},
                   {"separation", sep},
                   {"required_separation", kExtinctionSeparation}};
      rep.criteria.push_back(std::move(c));
    }
    return rep;
  });
}

namespace {

CommandOutput rates_command(const ExperimentConfig& cfg) {
  const CoalescentM m = cfg.make_coalescent();
  const RateTable table = rates(m, cfg.n + 1);
  json lam = json::array(), rr = json::array();
  double dev = 0.0, rec = 0.0;
  for (int n = 1; n <= cfg.n; ++n)
    for (int k = 1; k <= n; ++k) {
      if (k >= 2) {
        const double v = table.lambda(n, k), q = lambda_by_quadrature(m, n, k);
        dev = std::max(dev, relative_deviation(v, q, 1e-300));
        rec = std::max(rec, relative_deviation(v, table.lambda(n + 1, k) + table.lambda(n + 1, k + 1), 1e-300));
        lam.push_back({{"n", n}, {"k", k}, {"closed_form", v}, {"quadrature", q}});
      }
      const double v = table.r(n, k), q = r_by_quadrature(m, n, k);
      dev = std::max(dev, relative_deviation(v, q, 1e-300));
      rec = std::max(rec, relative_deviation(v, table.r(n + 1, k) + table.r(n + 1, k + 1), 1e-300));
      rr.push_back({{"n", n}, {"k", k}, {"closed_form", v}, {"quadrature", q}});
    }
  const bool ok = dev <= 1e-10 && rec <= 1e-10;
  const json out{{"coalescent", coalescent_to_json(m)},
                 {"n_max", cfg.n},
                 {"lambda", lam},
                 {"r", rr},
                 {"max_relative_deviation", dev},
                 {"max_recursion_deviation", rec},
                 {"tolerance", 1e-10},
                 {"passed", ok}};
  return {{{"rates.json", dump(out)}}, ok ? 0 : 1, 0.0};
}

CommandOutput genlab_command(const ExperimentConfig& cfg) {
  GenlabConfig g;
  g.suite.samples = cfg.samples;
  g.suite.seed = cfg.seed;
  g.feller_sigma2 = cfg.sigma2;
  g.feller_beta = cfg.beta;
  g.alpha = cfg.alpha;
  g.c = cfg.c;
  g.cprime = cfg.cprime;
  const GenlabReport rep = run_genlab(g);
  const auto in_suite = [&](const std::string& name) {
    if (cfg.suite == "all") return true;
    if (cfg.suite == "pushforward") return name == "pushforward";
    const bool gateaux = name.rfind("gateaux", 0) == 0 || name == "integral_of_derivative";
    return cfg.suite == "gateaux" ? gateaux : !gateaux && name != "pushforward";
  };
  json checks = json::array();
  bool ok = true;
  for (const auto& c : rep.checks) {
    if (!in_suite(c.name)) continue;
    ok = ok && c.passed;
    checks.push_back({{"name", c.name},
                      {"max_deviation", c.max_deviation},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed}});
  }
  const json out{{"suite", cfg.suite}, {"checks", checks}, {"all_passed", ok}, {"config", cfg.to_json()}};
  return {{{"genlab.json", dump(out)}}, ok ? 0 : 1, 0.0};
}

CommandOutput sim_command(const std::string& command, const ExperimentConfig& cfg) {
  const Mechanism mech = cfg.make_mechanism();
  std::ostringstream os;
  if (command == "sim-feller" || command == "sim-stable") {
    std::vector<PathGrid> paths(static_cast<std::size_t>(cfg.n_paths));
    parallel_for(paths.size(), [&](std::size_t i) {
      Stream rng(cfg.seed, derive_stream_id(kSimTag, i));
      paths[i] = command == "sim-feller"
                     ? sim_feller_cbi(mech.feller_params(), cfg.x0, cfg.horizon, cfg.dt, rng)
                     : sim_stable_cbi(mech.stable_params(), cfg.x0, cfg.horizon, cfg.dt,
                                      cfg.eps_trunc, rng);
    });
    write_path_csv(os, paths);
    return {{{"paths.csv", os.str()}}, 0, 0.0};
  }
  if (command == "sim-flow") {
    std::vector<FlowPath> flows(static_cast<std::size_t>(cfg.n_paths));
    const FlowOptions o = flow_options(cfg);
    parallel_for(flows.size(), [&](std::size_t i) {
      Stream rng(cfg.seed, derive_stream_id(kSimTag + 1, i));
      flows[i] = sim_flow(mech, o, rng);
    });
    write_measure_csv(os, flows);
    return {{{"measure.csv", os.str()}}, 0, 0.0};
  }
  if (command == "sim-gfvi") {
    GfviOptions o;
    o.n = cfg.n;
    o.horizon = cfg.horizon;
    o.eps_trunc = cfg.eps_trunc;
    o.observe_times = cfg.times;
    write_gfvi_csv(os, gfvi_replicates(cfg.make_coalescent(), o, cfg.replicates, cfg.seed));
    return {{{"gfvi.csv", os.str()}}, 0, 0.0};
  }
  // coalescent
  const RateTable table = rates(cfg.make_coalescent(), std::max(cfg.n, 2));
  std::vector<CoalescentPath> paths(static_cast<std::size_t>(cfg.replicates));
  parallel_for(paths.size(), [&](std::size_t i) {
    Stream rng(cfg.seed, derive_stream_id(kSimTag + 2, i));
    paths[i] = simulate_coalescent(cfg.n, table, cfg.horizon, rng);
  });
  write_coalescent_csv(os, paths);
  return {{{"coalescent.csv", os.str()}}, 0, 0.0};
}

}  // namespace

CommandOutput run_command(const std::string& command, const ExperimentConfig& cfg) {
  set_worker_count(static_cast<unsigned>(cfg.threads));
  const auto start = std::chrono::steady_clock::now();
  CommandOutput out;
  if (command.rfind("verify-", 0) == 0) {
    VerdictReport rep;
    if (command == "verify-theorem1") rep = verify_theorem1(cfg);
    else if (command == "verify-fixed-time") rep = verify_fixed_time(cfg);
    else if (command == "verify-independence") rep = verify_independence(cfg);
    else if (command == "verify-extinction") rep = verify_extinction(cfg);
    else throw ConfigError("unknown command '" + command + "'");
    out.files["verdict.json"] = dump(rep.to_json());
    out.exit_code = rep.exit_code();
  } else if (command == "rates") {
    out = rates_command(cfg);
  } else if (command == "genlab") {
    out = genlab_command(cfg);
  } else if (command == "sim-feller" || command == "sim-stable" || command == "sim-flow" ||
             command == "sim-gfvi" || command == "coalescent") {
    out = sim_command(command, cfg);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace fvlab
