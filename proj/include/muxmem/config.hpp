#pragma once

// Scenario configuration: JSON document <-> ScenarioConfig.
//
// Every block is optional and every key has a default. Unknown keys are
// rejected. Units are SI and carried in key names (_s, _hz, _m, _k, ...).
// Infinite values (beta_ratio, tau_mem_s) are written as the string "inf".

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cavity.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "repeater.hpp"
#include "timeline.hpp"

namespace muxmem {

inline constexpr int config_schema_version = 1;

enum class Scenario {
  mode_sweep,
  max_modes,
  cavity_design,
  pulse_enhancement,
  echo,
  protocol_run,
  crosstalk,
  storage_decay,
  repeater_rate,
};

inline constexpr std::string_view scenario_names[] = {
    "mode-sweep", "max-modes", "cavity-design", "pulse-enhancement", "echo",
    "protocol-run", "crosstalk", "storage-decay", "repeater-rate",
};

inline std::string_view to_string(Scenario s) { return scenario_names[static_cast<int>(s)]; }

inline std::optional<Scenario> scenario_from_string(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::size(scenario_names)); ++i)
    if (scenario_names[i] == name) return static_cast<Scenario>(i);
  return std::nullopt;
}

/// Train layout and gradient used by the protocol scenarios.
struct ScheduleConfig {
  int n_modes = 6;
  double mode_spacing_s = 800e-9;
  double write_duration_s = 266e-9;
  double gradient_gauss_per_cm = 10.0;
  double drift_rate_per_s = 0.0;
  bool freeze_release = false;
  double freeze_duration_s = 0.0;  ///< gradient nulled this long after the last pulse

  bool operator==(const ScheduleConfig&) const = default;
};

/// Scenario-specific sweep ranges.
struct SweepConfig {
  std::vector<double> beta_ratios{1, 11, 21, 31, 41, 51, 61, 71, 81};
  std::vector<double> p_int0_values{0.4, 0.55, 0.7, 0.85, 1.0};
  int max_modes = 10;         ///< largest train in mode-sweep and protocol-run
  double threshold = 5.8;     ///< g2 threshold for max-modes
  std::vector<double> losses{0.11, 0.01};
  int reflectivity_points = 99;
  std::vector<double> pulse_durations_s{25e-9, 50e-9, 100e-9, 266e-9, 1e-6};
  double detuning_span_hz = 60e6;
  int detuning_points = 121;
  std::vector<double> echo_durations_s{133e-9, 266e-9, 532e-9, 1064e-9};
  double write_time_s = 2e-6;
  double reversal_time_s = 4e-6;
  double echo_window_s = 1.5e-6;
  int echo_points = 151;
  double storage_max_s = 200e-6;
  int storage_points = 41;
  std::vector<double> distances_m{25e3, 50e3, 100e3, 200e3};
  std::vector<int> link_modes{1, 10, 100};
  double per_mode_success = 1e-3;

  bool operator==(const SweepConfig&) const = default;
};

struct ScenarioConfig {
  Scenario scenario = Scenario::cavity_design;
  MemoryParams memory{};
  CavityParams cavity{};
  PulseSpec pulse{};
  EnsembleSpec ensemble{};
  std::optional<FieldTimeline> timeline;  ///< overrides the scenario's default gradient schedule
  ScheduleConfig schedule{};
  LinkParams link{};
  SweepConfig sweep{};
  std::uint64_t rng_seed = 1;
  std::uint64_t trials = 200000;
  std::string output_path = ".";

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;

// Reads keys of one JSON object, tracking which were consumed.
class BlockReader {
 public:
  BlockReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out, const char* hint,
              const std::function<bool(double)>& valid = nullptr, bool allow_inf = false) {
    const json* v = find(key);
    if (v == nullptr) return;
    double value = 0.0;
    if (allow_inf && v->is_string() && v->get<std::string>() == "inf") {
      value = std::numeric_limits<double>::infinity();
    } else if (v->is_number()) {
      value = v->get<double>();
    } else {
      throw ConfigError(field(key), std::string("expected a number (") + hint + ")");
    }
    if ((!allow_inf && !std::isfinite(value)) || (valid && !valid(value)))
      throw ConfigError(field(key), std::string("value out of range; expected ") + hint);
    out = value;
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, const char* hint, const std::function<bool(double)>& valid) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) throw ConfigError(field(key), std::string("expected an integer (") + hint + ")");
    if (v->is_number_unsigned()) {
      const auto u = v->get<std::uint64_t>();
      if (!valid(static_cast<double>(u))) throw ConfigError(field(key), std::string("value out of range; expected ") + hint);
      out = static_cast<Int>(u);
    } else {
      const auto i = v->get<std::int64_t>();
      if (!valid(static_cast<double>(i))) throw ConfigError(field(key), std::string("value out of range; expected ") + hint);
      out = static_cast<Int>(i);
    }
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) throw ConfigError(field(key), "expected a string");
    out = v->get<std::string>();
  }

  template <typename T>
  void list(const std::string& key, std::vector<T>& out, const char* hint, const std::function<bool(double)>& valid) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_array() || v->empty()) throw ConfigError(field(key), std::string("expected a non-empty array (") + hint + ")");
    std::vector<T> values;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      const std::string where = field(key) + "[" + std::to_string(i) + "]";
      if (!e.is_number() || (std::is_integral_v<T> && !e.is_number_integer()))
        throw ConfigError(where, std::string("expected a number (") + hint + ")");
      const double x = e.get<double>();
      if (!std::isfinite(x) || !valid(x)) throw ConfigError(where, std::string("value out of range; expected ") + hint);
      values.push_back(static_cast<T>(x));
    }
    out = std::move(values);
  }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (const auto& [key, value] : object_.items())
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

inline bool probability(double x) { return x >= 0.0 && x <= 1.0; }
inline bool positive(double x) { return x > 0.0; }
inline bool non_negative(double x) { return x >= 0.0; }
inline bool any_value(double) { return true; }

inline void read_memory(BlockReader& r, MemoryParams& m) {
  r.number("p", m.p, "probability in [0,1]", probability);
  r.number("eta_w", m.eta_w, "probability in [0,1]", probability);
  r.number("eta_r", m.eta_r, "probability in [0,1]", probability);
  r.number("p_int0", m.p_int0, "probability in [0,1]", probability);
  r.number("beta_ratio", m.beta_ratio, "dimensionless >= 1 or \"inf\"", [](double x) { return x >= 1.0; }, true);
  r.number("xi_eg", m.xi_eg, "dimensionless in (0,1]", [](double x) { return x > 0.0 && x <= 1.0; });
  r.integer("n_modes", m.n_modes, "integer >= 1", [](double x) { return x >= 1 && x <= 1e6; });
  r.number("tau_mem_s", m.tau_mem_s, "seconds > 0 or \"inf\"", positive, true);
  std::string law = m.decay == DecayLaw::exponential ? "exponential" : "gaussian";
  r.string("decay_law", law);
  if (law == "exponential")
    m.decay = DecayLaw::exponential;
  else if (law == "gaussian")
    m.decay = DecayLaw::gaussian;
  else
    throw ConfigError(r.field("decay_law"), "expected \"exponential\" or \"gaussian\"");
  r.finish();
}

inline void read_cavity(BlockReader& r, CavityParams& c) {
  r.number("transmission", c.transmission, "dimensionless in (0,1)", [](double x) { return x > 0.0 && x < 1.0; });
  r.number("roundtrip_loss", c.roundtrip_loss, "dimensionless in [0,1)", [](double x) { return x >= 0.0 && x < 1.0; });
  r.number("roundtrip_length_m", c.roundtrip_length_m, "meters > 0", positive);
  r.finish();
}

inline void read_pulse(BlockReader& r, PulseSpec& p) {
  r.number("duration_fwhm_s", p.duration_fwhm_s, "seconds > 0", positive);
  r.finish();
}

inline void read_ensemble(BlockReader& r, EnsembleSpec& e) {
  r.integer("n_atoms", e.n_atoms, "integer >= 1", [](double x) { return x >= 1; });
  r.number("cloud_length_m", e.cloud_length_m, "meters > 0", positive);
  r.number("temperature_k", e.temperature_k, "kelvin >= 0", non_negative);
  r.number("k_sw_rad_per_m", e.k_sw_rad_per_m, "radians per meter >= 0", non_negative);
  r.number("zeeman_coeff_hz_per_gauss", e.zeeman_coeff_hz_per_gauss, "hertz per gauss > 0", positive);
  r.finish();
}

inline void read_timeline(BlockReader& r, FieldTimeline& t) {
  if (const json* segs = r.find("segments")) {
    if (!segs->is_array() || segs->empty()) throw ConfigError(r.field("segments"), "expected a non-empty array");
    std::vector<GradientSegment> out;
    for (std::size_t i = 0; i < segs->size(); ++i) {
      BlockReader s((*segs)[i], r.field("segments") + "[" + std::to_string(i) + "]");
      GradientSegment seg;
      s.number("t_start_s", seg.t_start_s, "seconds >= 0", non_negative);
      s.number("gradient_gauss_per_cm", seg.gradient_gauss_per_cm, "gauss per centimeter", any_value);
      s.finish();
      out.push_back(seg);
    }
    t.segments = std::move(out);
  }
  r.number("bias_gauss", t.bias_gauss, "gauss", any_value);
  r.number("drift_rate_per_s", t.drift_rate_per_s, "fraction per second", any_value);
  r.finish();
  try {
    t.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(r.field("segments"), e.what());
  }
}

inline void read_schedule(BlockReader& r, ScheduleConfig& s) {
  r.integer("n_modes", s.n_modes, "integer >= 1", [](double x) { return x >= 1 && x <= 1000; });
  r.number("mode_spacing_s", s.mode_spacing_s, "seconds > 0", positive);
  r.number("write_duration_s", s.write_duration_s, "seconds > 0", positive);
  r.number("gradient_gauss_per_cm", s.gradient_gauss_per_cm, "gauss per centimeter, non-zero",
           [](double x) { return x != 0.0; });
  r.number("drift_rate_per_s", s.drift_rate_per_s, "fraction per second", any_value);
  std::string policy = s.freeze_release ? "freeze_release" : "immediate";
  r.string("policy", policy);
  if (policy != "immediate" && policy != "freeze_release")
    throw ConfigError(r.field("policy"), "expected \"immediate\" or \"freeze_release\"");
  s.freeze_release = policy == "freeze_release";
  r.number("freeze_duration_s", s.freeze_duration_s, "seconds >= 0", non_negative);
  r.finish();
  if (s.n_modes > 1 && s.write_duration_s >= s.mode_spacing_s)
    throw ConfigError(r.field("write_duration_s"), "must be shorter than mode_spacing_s");
}

inline void read_link(BlockReader& r, LinkParams& l) {
  r.number("distance_m", l.distance_m, "meters > 0", positive);
  r.number("signal_velocity_m_per_s", l.signal_velocity_m_per_s, "meters per second in (0, c]",
           [](double x) { return x > 0.0 && x <= constants::speed_of_light; });
  r.integer("n_modes", l.n_modes, "integer >= 1", [](double x) { return x >= 1; });
  r.number("herald_time_s", l.herald_time_s, "seconds >= 0", non_negative);
  r.number("decision_delay_s", l.decision_delay_s, "seconds >= 0", non_negative);
  r.finish();
}

inline void read_sweep(BlockReader& r, SweepConfig& s) {
  r.list("beta_ratios", s.beta_ratios, "dimensionless >= 1", [](double x) { return x >= 1.0; });
  r.list("p_int0_values", s.p_int0_values, "probability in [0,1]", probability);
  r.integer("max_modes", s.max_modes, "integer >= 1", [](double x) { return x >= 1 && x <= 10000; });
  r.number("threshold", s.threshold, "dimensionless > 1", [](double x) { return x > 1.0; });
  r.list("losses", s.losses, "dimensionless in [0,1)", [](double x) { return x >= 0.0 && x < 1.0; });
  r.integer("reflectivity_points", s.reflectivity_points, "integer >= 2", [](double x) { return x >= 2; });
  r.list("pulse_durations_s", s.pulse_durations_s, "seconds > 0", positive);
  r.number("detuning_span_hz", s.detuning_span_hz, "hertz > 0", positive);
  r.integer("detuning_points", s.detuning_points, "integer >= 2", [](double x) { return x >= 2; });
  r.list("echo_durations_s", s.echo_durations_s, "seconds > 0", positive);
  r.number("write_time_s", s.write_time_s, "seconds >= 0", non_negative);
  r.number("reversal_time_s", s.reversal_time_s, "seconds > 0", positive);
  r.number("echo_window_s", s.echo_window_s, "seconds > 0", positive);
  r.integer("echo_points", s.echo_points, "integer >= 3", [](double x) { return x >= 3; });
  r.number("storage_max_s", s.storage_max_s, "seconds > 0", positive);
  r.integer("storage_points", s.storage_points, "integer >= 2", [](double x) { return x >= 2; });
  r.list("distances_m", s.distances_m, "meters > 0", positive);
  r.list("link_modes", s.link_modes, "integer >= 1", [](double x) { return x >= 1; });
  r.number("per_mode_success", s.per_mode_success, "probability in (0,1]", [](double x) { return x > 0.0 && x <= 1.0; });
  r.finish();
  if (s.write_time_s >= s.reversal_time_s) throw ConfigError(r.field("reversal_time_s"), "must follow write_time_s");
}

template <typename Fn>
void read_block(BlockReader& top, const std::string& key, Fn&& fn) {
  if (const json* block = top.find(key)) {
    BlockReader r(*block, key);
    fn(r);
  }
}

inline json inf_or_number(double x) { return std::isinf(x) ? json("inf") : json(x); }

}  // namespace detail

/// Parses and validates a configuration document. `scenario` (from the command
/// line) takes precedence; a "scenario" key in the document must agree with it.
inline ScenarioConfig parse_config(std::string_view text, std::optional<Scenario> scenario = std::nullopt) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  detail::BlockReader top(doc, "");
  ScenarioConfig cfg;

  if (const json* v = top.find("schema_version")) {
    if (!v->is_number_integer() || v->get<int>() != config_schema_version)
      throw ConfigError("schema_version", "unsupported schema version (expected " +
                                              std::to_string(config_schema_version) + ")");
  }
  std::optional<Scenario> declared;
  if (const json* v = top.find("scenario")) {
    if (!v->is_string()) throw ConfigError("scenario", "expected a scenario name");
    declared = scenario_from_string(v->get<std::string>());
    if (!declared) throw ConfigError("scenario", "unknown scenario \"" + v->get<std::string>() + "\"");
  }
  if (scenario && declared && *scenario != *declared)
    throw ConfigError("scenario", "config declares \"" + std::string(to_string(*declared)) +
                                      "\" but \"" + std::string(to_string(*scenario)) + "\" was requested");
  if (scenario)
    cfg.scenario = *scenario;
  else if (declared)
    cfg.scenario = *declared;
  else
    throw ConfigError("scenario", "no scenario given");

  top.integer("rng_seed", cfg.rng_seed, "unsigned 64-bit integer", [](double x) { return x >= 0; });
  top.integer("trials", cfg.trials, "integer >= 1", [](double x) { return x >= 1; });
  top.string("output_path", cfg.output_path);

  detail::read_block(top, "memory", [&](auto& r) { detail::read_memory(r, cfg.memory); });
  detail::read_block(top, "cavity", [&](auto& r) { detail::read_cavity(r, cfg.cavity); });
  detail::read_block(top, "pulse", [&](auto& r) { detail::read_pulse(r, cfg.pulse); });
  detail::read_block(top, "ensemble", [&](auto& r) { detail::read_ensemble(r, cfg.ensemble); });
  detail::read_block(top, "timeline", [&](auto& r) {
    FieldTimeline tl;
    detail::read_timeline(r, tl);
    cfg.timeline = tl;
  });
  detail::read_block(top, "schedule", [&](auto& r) { detail::read_schedule(r, cfg.schedule); });
  detail::read_block(top, "link", [&](auto& r) { detail::read_link(r, cfg.link); });
  detail::read_block(top, "sweep", [&](auto& r) { detail::read_sweep(r, cfg.sweep); });
  top.finish();
  return cfg;
}

/// Full document with every default spelled out.
inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  using detail::json;
  json j;
  j["schema_version"] = config_schema_version;
  j["scenario"] = std::string(to_string(c.scenario));
  j["rng_seed"] = c.rng_seed;
  j["trials"] = c.trials;
  j["output_path"] = c.output_path;
  j["memory"] = {
      {"p", c.memory.p},
      {"eta_w", c.memory.eta_w},
      {"eta_r", c.memory.eta_r},
      {"p_int0", c.memory.p_int0},
      {"beta_ratio", detail::inf_or_number(c.memory.beta_ratio)},
      {"xi_eg", c.memory.xi_eg},
      {"n_modes", c.memory.n_modes},
      {"tau_mem_s", detail::inf_or_number(c.memory.tau_mem_s)},
      {"decay_law", c.memory.decay == DecayLaw::exponential ? "exponential" : "gaussian"},
  };
  j["cavity"] = {{"transmission", c.cavity.transmission},
                 {"roundtrip_loss", c.cavity.roundtrip_loss},
                 {"roundtrip_length_m", c.cavity.roundtrip_length_m}};
  j["pulse"] = {{"duration_fwhm_s", c.pulse.duration_fwhm_s}};
  j["ensemble"] = {{"n_atoms", c.ensemble.n_atoms},
                   {"cloud_length_m", c.ensemble.cloud_length_m},
                   {"temperature_k", c.ensemble.temperature_k},
                   {"k_sw_rad_per_m", c.ensemble.k_sw_rad_per_m},
                   {"zeeman_coeff_hz_per_gauss", c.ensemble.zeeman_coeff_hz_per_gauss}};
  if (c.timeline) {
    json segs = json::array();
    for (const auto& s : c.timeline->segments)
      segs.push_back({{"t_start_s", s.t_start_s}, {"gradient_gauss_per_cm", s.gradient_gauss_per_cm}});
    j["timeline"] = {{"segments", segs},
                     {"bias_gauss", c.timeline->bias_gauss},
                     {"drift_rate_per_s", c.timeline->drift_rate_per_s}};
  }
  j["schedule"] = {{"n_modes", c.schedule.n_modes},
                   {"mode_spacing_s", c.schedule.mode_spacing_s},
                   {"write_duration_s", c.schedule.write_duration_s},
                   {"gradient_gauss_per_cm", c.schedule.gradient_gauss_per_cm},
                   {"drift_rate_per_s", c.schedule.drift_rate_per_s},
                   {"policy", c.schedule.freeze_release ? "freeze_release" : "immediate"},
                   {"freeze_duration_s", c.schedule.freeze_duration_s}};
  j["link"] = {{"distance_m", c.link.distance_m},
               {"signal_velocity_m_per_s", c.link.signal_velocity_m_per_s},
               {"n_modes", c.link.n_modes},
               {"herald_time_s", c.link.herald_time_s},
               {"decision_delay_s", c.link.decision_delay_s}};
  const auto& s = c.sweep;
  j["sweep"] = {
      {"beta_ratios", s.beta_ratios},
      {"p_int0_values", s.p_int0_values},
      {"max_modes", s.max_modes},
      {"threshold", s.threshold},
      {"losses", s.losses},
      {"reflectivity_points", s.reflectivity_points},
      {"pulse_durations_s", s.pulse_durations_s},
      {"detuning_span_hz", s.detuning_span_hz},
      {"detuning_points", s.detuning_points},
      {"echo_durations_s", s.echo_durations_s},
      {"write_time_s", s.write_time_s},
      {"reversal_time_s", s.reversal_time_s},
      {"echo_window_s", s.echo_window_s},
      {"echo_points", s.echo_points},
      {"storage_max_s", s.storage_max_s},
      {"storage_points", s.storage_points},
      {"distances_m", s.distances_m},
      {"link_modes", s.link_modes},
      {"per_mode_success", s.per_mode_success},
  };
  return j;
}

inline std::string serialize_config(const ScenarioConfig& c) { return config_to_json(c).dump(2) + "\n"; }

inline nlohmann::json tally_to_json(const CountsTally& t) {
  using detail::json;
  auto matrix = [](const Matrix<std::uint64_t>& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
      json row = json::array();
      for (std::size_t k = 0; k < m.cols; ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  json split = json::array();
  for (const auto& s : t.split_read_counts)
    split.push_back({{"heralded_reads", s.heralded_reads}, {"a", s.a}, {"b", s.b}, {"ab", s.ab},
                     {"a_clicks", s.a_clicks}, {"b_clicks", s.b_clicks}, {"both_clicks", s.both_clicks}});
  static constexpr const char* kinds[] = {"feed_forward", "fixed_mode", "all_heralded"};
  return {
      {"n_modes", t.n_modes},
      {"readout", kinds[static_cast<int>(t.readout)]},
      {"fixed_mode", t.fixed_mode},
      {"n_trials", t.n_trials},
      {"correlation_trials", t.correlation_trials},
      {"normalization_trials", t.normalization_trials},
      {"write_counts", t.write_counts},
      {"herald_counts", t.herald_counts},
      {"coincidence_counts", matrix(t.coincidence_counts)},
      {"coincidence_photons", matrix(t.coincidence_photons)},
      {"read_trials", t.read_trials},
      {"read_counts", t.read_counts},
      {"read_photons", t.read_photons},
      {"unconditional_trials", t.unconditional_trials},
      {"unconditional_read_counts", t.unconditional_read_counts},
      {"unconditional_read_photons", t.unconditional_read_photons},
      {"split_read_counts", split},
  };
}

inline nlohmann::json estimate_to_json(const Estimate& e) {
  if (!e.defined) return {{"value", nullptr}, {"stderr", nullptr}, {"defined", false}};
  return {{"value", e.value}, {"stderr", e.std_error}, {"defined", true}, {"one_sided", e.one_sided}};
}

}  // namespace muxmem
