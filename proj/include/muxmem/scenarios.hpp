#pragma once

// Scenario execution: each scenario produces a numeric table (written as CSV)
// and a JSON summary of its key scalars.

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "cavity.hpp"
#include "config.hpp"
#include "ensemble.hpp"
#include "model.hpp"
#include "protocol.hpp"
#include "repeater.hpp"

namespace muxmem {

inline constexpr int output_schema_version = 1;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    detail::require(row.size() == columns.size(), "row width does not match the header");
    rows.push_back(std::move(row));
  }
};

struct ScenarioResult {
  Table table;
  nlohmann::json summary;
};

/// Shortest representation that round-trips; "inf"/"nan" for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, x);
  return std::string(buffer, end);
}

inline std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline void write_text(const std::string& text, const std::string& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path + " for writing");
  file << text;
  file.flush();
  if (!file) throw IoError("failed writing " + path);
}

inline void emit_csv(const Table& table, const std::string& path) { write_text(to_csv(table), path); }

inline void emit_json(const nlohmann::json& summary, const std::string& path) { write_text(summary.dump(2) + "\n", path); }

/// Least-squares line y = slope x + intercept with coefficient of determination.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require(x.size() == y.size() && x.size() >= 2, "fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

namespace scenarios {

using json = nlohmann::json;

inline ScenarioResult mode_sweep(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"beta_ratio", "n_modes", "g2"};
  json families = json::array();
  for (double beta : cfg.sweep.beta_ratios) {
    const auto mem = cfg.memory.with_beta_ratio(beta);
    for (int n = 1; n <= cfg.sweep.max_modes; ++n) r.table.add({beta, double(n), cross_correlation(mem.with_modes(n))});
    families.push_back({{"beta_ratio", beta},
                        {"g2_single_mode", cross_correlation(mem.with_modes(1))},
                        {"g2_max_modes", cross_correlation(mem.with_modes(cfg.sweep.max_modes))}});
  }
  r.summary = {{"families", families}, {"max_modes", cfg.sweep.max_modes}};
  return r;
}

inline double capacity_value(const ModeCapacity& c) {
  return c.unbounded ? std::numeric_limits<double>::infinity() : static_cast<double>(c.modes);
}

inline ScenarioResult max_modes(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"p_int0", "beta_ratio", "max_modes"};
  json fits = json::array();
  for (double p_int0 : cfg.sweep.p_int0_values) {
    MemoryParams mem = cfg.memory;
    mem.p_int0 = p_int0;
    std::vector<double> xs, ys;
    for (double beta : cfg.sweep.beta_ratios) {
      const double n = capacity_value(max_modes(mem.with_beta_ratio(beta), cfg.sweep.threshold));
      r.table.add({p_int0, beta, n});
      if (std::isfinite(n)) {
        xs.push_back(beta);
        ys.push_back(n);
      }
    }
    json entry = {{"p_int0", p_int0}};
    if (xs.size() >= 2) {
      const auto fit = fit_line(xs, ys);
      entry["slope"] = fit.slope;
      entry["intercept"] = fit.intercept;
      entry["r_squared"] = fit.r_squared;
    }
    fits.push_back(entry);
  }
  const auto own = max_modes(cfg.memory, cfg.sweep.threshold);
  r.summary = {{"threshold", cfg.sweep.threshold},
               {"max_modes", own.unbounded ? json("unbounded") : json(own.modes)},
               {"linear_fits", fits}};
  return r;
}

inline ScenarioResult cavity_design(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"roundtrip_loss", "reflectivity", "finesse", "escape_efficiency", "rate_gain"};
  json optima = json::array();
  for (double loss : cfg.sweep.losses) {
    for (double refl : linspace(0.01, 0.99, cfg.sweep.reflectivity_points)) {
      const double t = 1.0 - refl;
      r.table.add({loss, refl, finesse(t, loss), escape_efficiency(t, loss), rate_gain(t, loss)});
    }
    const auto opt = optimal_outcoupler(loss);
    optima.push_back({{"roundtrip_loss", loss}, {"transmission_opt", opt.transmission}, {"gain_max", opt.gain}});
  }
  const auto& cav = cfg.cavity;
  const auto own = optimal_outcoupler(cav.roundtrip_loss);
  r.summary = {{"finesse", finesse(cav)},
               {"escape_efficiency", escape_efficiency(cav)},
               {"enhancement_factor", enhancement_factor(cav)},
               {"gain_at_T", rate_gain(cav)},
               {"gain_max", own.gain},
               {"transmission_opt", own.transmission},
               {"fsr_hz", fsr(cav)},
               {"linewidth_hz", linewidth(cav)},
               {"optima", optima}};
  return r;
}

inline ScenarioResult pulse_enhancement(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"pulse_fwhm_s", "detuning_hz", "enhancement"};
  json peaks = json::array();
  const double span = cfg.sweep.detuning_span_hz;
  for (double duration : cfg.sweep.pulse_durations_s) {
    const PulseSpec pulse{duration};
    std::vector<EchoPoint> profile;
    for (double det : linspace(-span, span, cfg.sweep.detuning_points)) {
      const double e = effective_enhancement(cfg.cavity, pulse, det);
      r.table.add({duration, det, e});
      profile.push_back({det, e});
    }
    const auto peak = analyze_echo(profile);
    peaks.push_back({{"pulse_fwhm_s", duration}, {"peak_enhancement", peak.height}, {"fwhm_hz", peak.fwhm_s}});
  }
  r.summary = {{"enhancement_factor", enhancement_factor(cfg.cavity)},
               {"linewidth_hz", linewidth(cfg.cavity)},
               {"profiles", peaks}};
  return r;
}

inline FieldTimeline echo_timeline(const ScenarioConfig& cfg) {
  if (cfg.timeline) return *cfg.timeline;
  return FieldTimeline::reversal(cfg.schedule.gradient_gauss_per_cm, cfg.sweep.reversal_time_s,
                                 cfg.schedule.drift_rate_per_s);
}

inline ScenarioResult echo(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"pulse_fwhm_s", "time_s", "efficiency"};
  const auto timeline = echo_timeline(cfg);
  const auto ensemble = sample_ensemble(cfg.ensemble, cfg.rng_seed);
  const double t_w = cfg.sweep.write_time_s;
  const double t_reph = rephasing_time(timeline.without_drift(), t_w);
  const auto grid = linspace(t_reph - cfg.sweep.echo_window_s, t_reph + cfg.sweep.echo_window_s, cfg.sweep.echo_points);
  json peaks = json::array();
  for (double duration : cfg.sweep.echo_durations_s) {
    const auto profile = echo_profile(ensemble, timeline, t_w, PulseSpec{duration}, cfg.memory.p_int0, grid);
    for (const auto& pt : profile) r.table.add({duration, pt.time_s, pt.efficiency});
    const auto peak = analyze_echo(profile);
    peaks.push_back({{"pulse_fwhm_s", duration}, {"peak_time_s", peak.time_s}, {"peak_efficiency", peak.height},
                     {"fwhm_s", peak.fwhm_s}});
  }
  r.summary = {{"write_time_s", t_w}, {"rephasing_time_s", t_reph}, {"n_atoms", ensemble.size()}, {"peaks", peaks}};
  return r;
}

inline ScalingSpec scaling_spec(const ScenarioConfig& cfg) {
  ScalingSpec spec;
  spec.max_modes = cfg.sweep.max_modes;
  spec.mode_spacing_s = cfg.schedule.mode_spacing_s;
  spec.write_duration_s = cfg.schedule.write_duration_s;
  spec.gradient_gauss_per_cm = cfg.schedule.gradient_gauss_per_cm;
  spec.drift_rate_per_s = cfg.schedule.drift_rate_per_s;
  spec.freeze_duration_s = cfg.schedule.freeze_release ? cfg.schedule.freeze_duration_s : 0.0;
  return spec;
}

inline ScenarioResult protocol_run(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"n_modes", "p_w_total", "p_wr_total", "g2_avg", "g2_stderr"};
  const auto spec = scaling_spec(cfg);
  const auto ensemble = sample_ensemble(cfg.ensemble, cfg.rng_seed);
  const auto rows = coincidence_scaling(cfg.memory, spec, ensemble, cfg.trials, cfg.rng_seed);
  for (const auto& row : rows)
    r.table.add({double(row.n_modes), row.p_w_total.value, row.p_wr_total.value, row.g2_avg.value,
                 row.g2_avg.std_error});

  // heralded autocorrelation of the largest train under feed-forward readout
  const int n = spec.max_modes;
  const auto layout = train_layout(n, spec.mode_spacing_s, spec.write_duration_s, spec.gradient_gauss_per_cm,
                                   spec.drift_rate_per_s, spec.freeze_duration_s);
  const auto schedule = build_train(n, spec.mode_spacing_s, spec.write_duration_s, layout);
  const auto tally = run_trials(cfg.memory.with_modes(n), schedule, cfg.trials,
                                detail::substream_key(cfg.rng_seed, 0xffu), FeedForward{});
  const auto& first = rows.front();
  const auto& last = rows.back();
  r.summary = {{"p_w_ratio", last.p_w_total.value / first.p_w_total.value},
               {"p_wr_ratio", last.p_wr_total.value / first.p_wr_total.value},
               {"g2_model_max_modes", cross_correlation(cfg.memory.with_modes(n))},
               {"heralded_autocorrelation", estimate_to_json(heralded_autocorrelation(tally))},
               {"feed_forward_tally", tally_to_json(tally)}};
  return r;
}

inline ScenarioResult crosstalk(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"write_mode", "read_mode", "g2", "g2_stderr"};
  const auto& s = cfg.schedule;
  const auto layout = train_layout(s.n_modes, s.mode_spacing_s, s.write_duration_s, s.gradient_gauss_per_cm,
                                   s.drift_rate_per_s, s.freeze_release ? s.freeze_duration_s : 0.0);
  const auto schedule = build_train(s.n_modes, s.mode_spacing_s, s.write_duration_s, layout);
  const auto result = crosstalk_matrix(cfg.memory.with_modes(s.n_modes), schedule, cfg.trials, cfg.rng_seed);
  for (int i = 0; i < s.n_modes; ++i)
    for (int j = 0; j < s.n_modes; ++j) {
      const auto& e = result.g2(i, j);
      r.table.add({double(i), double(j), e.value, e.std_error});
    }
  const double diag = result.weighted_average(true);
  const double off = result.weighted_average(false);
  r.summary = {{"n_modes", s.n_modes},
               {"diagonal_average", diag},
               {"off_diagonal_average", s.n_modes > 1 ? json(off) : json(nullptr)},
               {"diagonal_model", cross_correlation(cfg.memory.with_modes(s.n_modes))}};
  return r;
}

inline ScenarioResult storage_decay(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"time_s", "g2_cavity", "g2_nocavity"};
  const auto with_cavity = cfg.memory;
  const auto without_cavity = cfg.memory.with_beta_ratio(1.0);
  const auto times = linspace(0.0, cfg.sweep.storage_max_s, cfg.sweep.storage_points);
  for (double t : times) r.table.add({t, cross_correlation(with_cavity, t), cross_correlation(without_cavity, t)});
  const double tau = cfg.memory.tau_mem_s;
  auto drop = [&](const MemoryParams& m) {
    return std::isfinite(tau) ? 1.0 - (cross_correlation(m, tau) - 1.0) / (cross_correlation(m, 0.0) - 1.0) : 0.0;
  };
  r.summary = {{"gain_at_zero", cavity_gain(with_cavity, without_cavity, 0.0)},
               {"drop_at_tau_cavity", drop(with_cavity)},
               {"drop_at_tau_nocavity", drop(without_cavity)},
               {"tau_mem_s", detail::inf_or_number(tau)}};
  return r;
}

inline ScenarioResult repeater_rate(const ScenarioConfig& cfg) {
  ScenarioResult r;
  r.table.columns = {"distance_m", "n_modes", "repetition_rate_hz", "multiplexed_rate_hz", "multiplexing_gain"};
  const double q = cfg.sweep.per_mode_success;
  for (double distance : cfg.sweep.distances_m)
    for (int n : cfg.sweep.link_modes) {
      LinkParams link = cfg.link;
      link.distance_m = distance;
      link.n_modes = n;
      r.table.add({distance, double(n), repetition_rate(link), multiplexed_rate(link, q), multiplexing_gain(link, q)});
    }
  const auto& link = cfg.link;
  const double train = train_reversal_time(cfg.schedule.n_modes, cfg.schedule.mode_spacing_s,
                                           cfg.schedule.write_duration_s);
  r.summary = {{"repetition_rate_hz", repetition_rate(link)},
               {"multiplexed_rate_hz", multiplexed_rate(link, q)},
               {"latency_immediate_s", readout_latency(link, ReadoutPolicyKind::immediate_reversal)},
               {"latency_freeze_release_s", readout_latency(link, ReadoutPolicyKind::freeze_release, train)},
               {"storage_for_100_modes_s", train_storage_requirement(100, cfg.schedule.mode_spacing_s)}};
  return r;
}

}  // namespace scenarios

/// Runs the configured scenario. Deterministic for a fixed config (incl. rng_seed).
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  ScenarioResult r;
  switch (cfg.scenario) {
    case Scenario::mode_sweep: r = scenarios::mode_sweep(cfg); break;
    case Scenario::max_modes: r = scenarios::max_modes(cfg); break;
    case Scenario::cavity_design: r = scenarios::cavity_design(cfg); break;
    case Scenario::pulse_enhancement: r = scenarios::pulse_enhancement(cfg); break;
    case Scenario::echo: r = scenarios::echo(cfg); break;
    case Scenario::protocol_run: r = scenarios::protocol_run(cfg); break;
    case Scenario::crosstalk: r = scenarios::crosstalk(cfg); break;
    case Scenario::storage_decay: r = scenarios::storage_decay(cfg); break;
    case Scenario::repeater_rate: r = scenarios::repeater_rate(cfg); break;
  }
  nlohmann::json summary = {{"schema_version", output_schema_version},
                            {"scenario", std::string(to_string(cfg.scenario))},
                            {"rng_seed", cfg.rng_seed}};
  summary.update(r.summary);
  r.summary = std::move(summary);
  return r;
}

}  // namespace muxmem
