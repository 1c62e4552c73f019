#pragma once

// Monte Carlo spin-wave phase evolution of a cold 87Rb cloud under a
// programmable magnetic gradient.
//
// Atom j accumulates
//   phi_j(t) = k_sw v_j (t - t_w)
//            + int_{t_w}^{t} 2 pi gamma [B0 + A(t')(1 + d t') (z_j + v_j (t' - t_w))] dt'
// which is affine in (z_j, v_j) with coefficients given by the gradient moments,
// so every phase is evaluated in closed form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cavity.hpp"
#include "constants.hpp"
#include "detail/parallel.hpp"
#include "detail/rng.hpp"
#include "errors.hpp"
#include "timeline.hpp"

namespace muxmem {

/// RMS thermal velocity along one axis, sqrt(k_B T / m).
inline double thermal_velocity_spread(double temperature_k) {
  detail::require(temperature_k >= 0.0, "temperature must be non-negative");
  return std::sqrt(constants::boltzmann * temperature_k / constants::rb87_mass);
}

/// Spin-wave wavevector whose motional 1/e lifetime equals `lifetime_s` at `temperature_k`.
inline double motional_k_sw(double temperature_k, double lifetime_s) {
  return 1.0 / (thermal_velocity_spread(temperature_k) * lifetime_s);
}

inline double default_k_sw() { return motional_k_sw(40e-6, 72e-6); }

struct EnsembleSpec {
  std::size_t n_atoms = 10000;
  double cloud_length_m = 4e-3;  ///< Gaussian sigma is length / 4
  double temperature_k = 40e-6;
  double k_sw_rad_per_m = default_k_sw();
  double zeeman_coeff_hz_per_gauss = constants::zeeman_coeff_rb87;

  double cloud_sigma_m() const { return cloud_length_m / 4.0; }

  bool operator==(const EnsembleSpec&) const = default;
};

struct AtomEnsemble {
  std::vector<double> positions_m;
  std::vector<double> velocities_m_per_s;
  double cloud_sigma_m = 0.0;
  double temperature_k = 0.0;
  double k_sw_rad_per_m = 0.0;
  double zeeman_coeff_hz_per_gauss = constants::zeeman_coeff_rb87;

  std::size_t size() const { return positions_m.size(); }

  void validate() const {
    detail::require(!positions_m.empty(), "ensemble must contain at least one atom");
    detail::require(positions_m.size() == velocities_m_per_s.size(), "positions and velocities differ in length");
    detail::require(zeeman_coeff_hz_per_gauss > 0.0, "zeeman_coeff must be > 0");
    detail::require(k_sw_rad_per_m >= 0.0, "k_sw must be >= 0");
  }

  bool operator==(const AtomEnsemble&) const = default;
};

/// Positions ~ N(0, sigma^2), velocities ~ N(0, k_B T / m). Each atom draws from
/// its own substream of `seed`, so the result does not depend on thread count.
inline AtomEnsemble sample_ensemble(std::size_t n_atoms, double cloud_sigma_m, double temperature_k,
                                    double k_sw_rad_per_m, double zeeman_coeff_hz_per_gauss, std::uint64_t seed) {
  detail::require(n_atoms >= 1, "n_atoms must be >= 1");
  detail::require(cloud_sigma_m > 0.0, "cloud_sigma must be > 0");
  detail::require(temperature_k >= 0.0, "temperature must be >= 0");
  AtomEnsemble ens;
  ens.cloud_sigma_m = cloud_sigma_m;
  ens.temperature_k = temperature_k;
  ens.k_sw_rad_per_m = k_sw_rad_per_m;
  ens.zeeman_coeff_hz_per_gauss = zeeman_coeff_hz_per_gauss;
  ens.positions_m.resize(n_atoms);
  ens.velocities_m_per_s.resize(n_atoms);
  const double sigma_v = thermal_velocity_spread(temperature_k);
  for (std::size_t j = 0; j < n_atoms; ++j) {
    detail::Stream rng(seed, j);
    ens.positions_m[j] = rng.normal(0.0, cloud_sigma_m);
    ens.velocities_m_per_s[j] = sigma_v > 0.0 ? rng.normal(0.0, sigma_v) : 0.0;
  }
  ens.validate();
  return ens;
}

inline AtomEnsemble sample_ensemble(const EnsembleSpec& spec, std::uint64_t seed) {
  return sample_ensemble(spec.n_atoms, spec.cloud_sigma_m(), spec.temperature_k, spec.k_sw_rad_per_m,
                         spec.zeeman_coeff_hz_per_gauss, seed);
}

/// Two-photon detuning 2 pi gamma B in rad/s.
inline double zeeman_detuning(const AtomEnsemble& ens, double field_gauss) {
  return constants::two_pi * ens.zeeman_coeff_hz_per_gauss * field_gauss;
}

/// phi_j = common + per_position z_j + per_velocity v_j
struct PhaseCoefficients {
  double common = 0.0;        ///< rad
  double per_position = 0.0;  ///< rad/m
  double per_velocity = 0.0;  ///< rad/(m/s)
};

inline PhaseCoefficients phase_coefficients(const AtomEnsemble& ens, const FieldTimeline& timeline,
                                            double write_time, double t) {
  detail::require(t >= write_time, "query time precedes the write time");
  const double omega_per_gauss = constants::two_pi * ens.zeeman_coeff_hz_per_gauss;
  const auto moments = gradient_moments(timeline, write_time, t);
  const double elapsed = t - write_time;
  return {omega_per_gauss * timeline.bias_gauss * elapsed,
          omega_per_gauss * constants::centimeters_per_meter * moments.area,
          ens.k_sw_rad_per_m * elapsed + omega_per_gauss * constants::centimeters_per_meter * moments.first_moment};
}

struct PhaseState {
  double write_time_s = 0.0;
  std::vector<double> phases;
};

inline PhaseState accumulate_phase(const AtomEnsemble& ens, const FieldTimeline& timeline, double write_time,
                                   double t) {
  ens.validate();
  timeline.validate();
  const auto c = phase_coefficients(ens, timeline, write_time, t);
  PhaseState state{write_time, std::vector<double>(ens.size())};
  for (std::size_t j = 0; j < ens.size(); ++j)
    state.phases[j] = c.common + c.per_position * ens.positions_m[j] + c.per_velocity * ens.velocities_m_per_s[j];
  return state;
}

/// |mean_j exp(i phi_j)|^2
inline double phasor_coherence(std::span<const double> phases) {
  detail::require(!phases.empty(), "no phases");
  double re = 0.0;
  double im = 0.0;
  for (double phi : phases) {
    re += std::cos(phi);
    im += std::sin(phi);
  }
  const double n = static_cast<double>(phases.size());
  return (re * re + im * im) / (n * n);
}

namespace detail {

// Coherence for affine phases; the common term is a global phase and drops out.
inline double affine_coherence(const AtomEnsemble& ens, double per_position, double per_velocity) {
  double re = 0.0;
  double im = 0.0;
  const std::size_t n = ens.size();
  const double* z = ens.positions_m.data();
  const double* v = ens.velocities_m_per_s.data();
  for (std::size_t j = 0; j < n; ++j) {
    const double phi = per_position * z[j] + per_velocity * v[j];
    re += std::cos(phi);
    im += std::sin(phi);
  }
  const double nn = static_cast<double>(n);
  return (re * re + im * im) / (nn * nn);
}

}  // namespace detail

inline double collective_efficiency(const PhaseState& state, double p_int0) {
  return p_int0 * phasor_coherence(state.phases);
}

/// p_int0 |(1/N) sum_j exp(i phi_j(t))|^2 including motional and field phases.
inline double collective_efficiency(const AtomEnsemble& ens, const FieldTimeline& timeline, double write_time,
                                    double t, double p_int0) {
  ens.validate();
  timeline.validate();
  const auto c = phase_coefficients(ens, timeline, write_time, t);
  return p_int0 * detail::affine_coherence(ens, c.per_position, c.per_velocity);
}

/// Position-only coherence |mean exp(i phi_field(z_j))|^2: how well the gradient
/// phase has been undone at time t, ignoring atomic motion.
inline double rephasing_fidelity(const AtomEnsemble& ens, const FieldTimeline& timeline, double write_time,
                                 double t) {
  ens.validate();
  const auto c = phase_coefficients(ens, timeline, write_time, t);
  return detail::affine_coherence(ens, c.per_position, 0.0);
}

struct EchoPoint {
  double time_s;
  double efficiency;
};

/// Creation-time quadrature over a Gaussian write envelope: composite Simpson on
/// +-4 sigma, weights normalized to one.
struct CreationNode {
  double time_s;
  double weight;
};

inline std::vector<CreationNode> creation_nodes(const PulseSpec& pulse, double center_s, int nodes) {
  pulse.validate();
  detail::require(nodes >= 33 && nodes % 2 == 1, "creation-time quadrature needs an odd node count >= 33");
  const double sigma = pulse.sigma_s();
  const double span = 4.0;
  const double h = 2.0 * span / (nodes - 1);
  std::vector<CreationNode> out(static_cast<std::size_t>(nodes));
  double total = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = -span + h * i;
    const double simpson = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    out[i] = {center_s + x * sigma, simpson * std::exp(-0.5 * x * x)};
    total += out[i].weight;
  }
  for (auto& n : out) n.weight /= total;
  return out;
}

/// Retrieval efficiency vs. time, averaged over spin-wave creation times within
/// the write pulse. Excitations created after a grid time do not contribute there.
inline std::vector<EchoPoint> echo_profile(const AtomEnsemble& ens, const FieldTimeline& timeline, double write_time,
                                           const PulseSpec& pulse, double p_int0, std::span<const double> time_grid,
                                           int nodes = 65, unsigned workers = 0) {
  ens.validate();
  timeline.validate();
  for (std::size_t i = 1; i < time_grid.size(); ++i)
    detail::require(time_grid[i] >= time_grid[i - 1], "echo time grid must be sorted");
  const auto creation = creation_nodes(pulse, write_time, nodes);
  std::vector<EchoPoint> out(time_grid.size());
  detail::parallel_chunks(time_grid.size(), detail::resolve_workers(workers),
                          [&](unsigned, std::size_t begin, std::size_t end) {
                            for (std::size_t i = begin; i < end; ++i) {
                              const double t = time_grid[i];
                              double value = 0.0;
                              for (const auto& node : creation) {
                                if (node.time_s > t) continue;
                                const auto c = phase_coefficients(ens, timeline, node.time_s, t);
                                value += node.weight * detail::affine_coherence(ens, c.per_position, c.per_velocity);
                              }
                              out[i] = {t, p_int0 * value};
                            }
                          });
  return out;
}

struct EchoPeak {
  double time_s = 0.0;
  double height = 0.0;
  double fwhm_s = 0.0;  ///< linear interpolation at half maximum; 0 if a side is not resolved
};

inline EchoPeak analyze_echo(std::span<const EchoPoint> profile) {
  detail::require(!profile.empty(), "empty echo profile");
  std::size_t best = 0;
  for (std::size_t i = 1; i < profile.size(); ++i)
    if (profile[i].efficiency > profile[best].efficiency) best = i;
  EchoPeak peak{profile[best].time_s, profile[best].efficiency, 0.0};
  const double half = 0.5 * peak.height;
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const auto& a = profile[inside];
    const auto& b = profile[outside];
    return a.time_s + (half - a.efficiency) * (b.time_s - a.time_s) / (b.efficiency - a.efficiency);
  };
  std::size_t left = best;
  while (left > 0 && profile[left - 1].efficiency >= half) --left;
  std::size_t right = best;
  while (right + 1 < profile.size() && profile[right + 1].efficiency >= half) ++right;
  if (left == 0 || right + 1 == profile.size()) return peak;
  peak.fwhm_s = crossing(right, right + 1) - crossing(left, left - 1);
  return peak;
}

}  // namespace muxmem
