#pragma once

// Closed-form photon statistics of a cavity-enhanced, temporally multiplexed
// DLCZ memory: click probabilities, heralded retrieval, dephased-mode noise and
// the write-read cross-correlation.
//
// Every quantity is first order in the excitation probability p. The write
// photon is enhanced by the cavity (solid-angle fraction beta_w) while the read
// photon is not (beta_r), so only the ratio beta_w/beta_r enters.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace muxmem {

enum class DecayLaw { exponential, gaussian };

struct MemoryParams {
  double p = 0.045;           ///< pair creation probability per mode per trial
  double eta_w = 0.3;         ///< write photon detection efficiency (incl. cavity escape)
  double eta_r = 0.25;         ///< read photon detection efficiency
  double p_int0 = 0.4;        ///< intrinsic retrieval efficiency at zero storage time
  double beta_ratio = 14.0;   ///< beta_w / beta_r; 1 without cavity, +inf allowed
  double xi_eg = 1.0;         ///< branching ratio of the read transition
  int n_modes = 1;
  double tau_mem_s = 72e-6;   ///< 1/e memory lifetime; +inf disables decay
  DecayLaw decay = DecayLaw::exponential;

  void validate() const {
    auto probability = [](double v, const char* name) {
      detail::require(v >= 0.0 && v <= 1.0, std::string(name) + " must lie in [0,1]");
    };
    probability(p, "p");
    probability(eta_w, "eta_w");
    probability(eta_r, "eta_r");
    probability(p_int0, "p_int0");
    detail::require(beta_ratio >= 1.0, "beta_ratio must be >= 1");
    detail::require(xi_eg > 0.0 && xi_eg <= 1.0, "xi_eg must lie in (0,1]");
    detail::require(n_modes >= 1, "n_modes must be >= 1");
    detail::require(tau_mem_s > 0.0, "tau_mem_s must be > 0");
  }

  /// Intrinsic retrieval efficiency after `storage_time` seconds.
  double p_int(double storage_time) const {
    detail::require(storage_time >= 0.0, "storage time must be non-negative");
    if (std::isinf(tau_mem_s)) return p_int0;
    const double x = storage_time / tau_mem_s;
    return decay == DecayLaw::exponential ? p_int0 * std::exp(-x) : p_int0 * std::exp(-x * x);
  }

  /// Read photons per dephased spin excitation, relative to the write mode: xi_eg * beta_r / beta_w.
  double noise_coefficient() const { return xi_eg / beta_ratio; }

  MemoryParams with_modes(int n) const {
    MemoryParams copy = *this;
    copy.n_modes = n;
    return copy;
  }

  MemoryParams with_beta_ratio(double ratio) const {
    MemoryParams copy = *this;
    copy.beta_ratio = ratio;
    return copy;
  }

  bool operator==(const MemoryParams&) const = default;
};

namespace detail {

// p * (N_m - p_int) * xi/beta: coherent-mode incoherent emission plus all dephased modes.
inline double dephased_excitations(const MemoryParams& m, double p_int) {
  return m.p * (static_cast<double>(m.n_modes) - p_int) * m.noise_coefficient();
}

}  // namespace detail

/// Per-mode write click probability.
inline double write_prob(const MemoryParams& m) {
  m.validate();
  return m.p * m.eta_w;
}

/// Unconditional read click probability of the read-out mode.
inline double read_prob(const MemoryParams& m, double storage_time = 0.0) {
  m.validate();
  const double pi = m.p_int(storage_time);
  return m.p * m.eta_r * (pi + (m.n_modes - pi) * m.noise_coefficient());
}

/// Write-read coincidence probability for the same mode.
inline double coincidence_prob(const MemoryParams& m, double storage_time = 0.0) {
  m.validate();
  const double pi = m.p_int(storage_time);
  return m.p * m.eta_w * m.eta_r * (pi + detail::dephased_excitations(m, pi));
}

/// Read photon detection probability from dephased and non-rephased excitations, given a write click.
inline double noise_given_write(const MemoryParams& m, double storage_time = 0.0) {
  m.validate();
  return detail::dephased_excitations(m, m.p_int(storage_time)) * m.eta_r;
}

/// Detected retrieval efficiency p_{r|w}: coherent retrieval plus noise.
inline double retrieval_given_write(const MemoryParams& m, double storage_time = 0.0) {
  return m.p_int(storage_time) * m.eta_r + noise_given_write(m, storage_time);
}

inline double cross_correlation(const MemoryParams& m, double storage_time = 0.0) {
  m.validate();
  if (m.p <= 0.0) throw UndefinedCorrelation("cross-correlation undefined for p = 0");
  const double pi = m.p_int(storage_time);
  const double denominator = m.p * pi + detail::dephased_excitations(m, pi);
  if (denominator <= 0.0)
    throw UndefinedCorrelation("cross-correlation undefined: no read emission at this storage time");
  return 1.0 + pi * (1.0 - m.p) / denominator;
}

/// (g2_cavity - 1) / (g2_nocavity - 1). The efficiencies and p cancel.
inline double cavity_gain(const MemoryParams& with_cavity, const MemoryParams& without_cavity,
                          double storage_time = 0.0) {
  MemoryParams probe = with_cavity;
  probe.beta_ratio = without_cavity.beta_ratio;
  detail::require(probe == without_cavity,
                  "cavity_gain: parameter sets must differ only in beta_ratio");
  if (with_cavity.beta_ratio == without_cavity.beta_ratio) return 1.0;
  const double gc = cross_correlation(with_cavity, storage_time) - 1.0;
  const double g0 = cross_correlation(without_cavity, storage_time) - 1.0;
  return gc / g0;
}

/// Result of a mode-capacity query.
struct ModeCapacity {
  bool unbounded = false;
  std::int64_t modes = 0;  ///< meaningful when !unbounded

  static ModeCapacity unlimited() { return {true, 0}; }
  static ModeCapacity finite(std::int64_t n) { return {false, n}; }
  bool operator==(const ModeCapacity&) const = default;
};

/// Largest N_m with g2(N_m, t = 0) strictly above `threshold`, by inverting the
/// g2 expression:  N < p_int + (p_int (1-p) / (p (threshold-1)) - p_int) / (xi/beta).
inline ModeCapacity max_modes(const MemoryParams& m, double threshold) {
  m.validate();
  detail::require(threshold > 1.0, "threshold must exceed 1");
  detail::require(m.p > 0.0, "max_modes requires p > 0");
  const double pi = m.p_int0;
  // p_int + (N - p_int) c < budget
  const double budget = pi * (1.0 - m.p) / (m.p * (threshold - 1.0));
  const double c = m.noise_coefficient();
  if (c == 0.0) {
    // no dephased noise: g2 = 1 + (1-p)/p for every N_m
    return pi > 0.0 && budget > pi ? ModeCapacity::unlimited() : ModeCapacity::finite(0);
  }
  const double bound = pi + (budget - pi) / c;
  if (!(bound > 1.0)) return ModeCapacity::finite(0);
  // largest integer strictly below bound
  double n = std::ceil(bound) - 1.0;
  if (n > static_cast<double>(std::numeric_limits<std::int64_t>::max()))
    return ModeCapacity::unlimited();
  return ModeCapacity::finite(static_cast<std::int64_t>(n));
}

struct G2Point {
  double time_s;
  double g2;
};

inline std::vector<G2Point> g2_vs_storage(const MemoryParams& m, std::span<const double> times) {
  std::vector<G2Point> out;
  out.reserve(times.size());
  double previous = 0.0;
  for (double t : times) {
    detail::require(t >= 0.0 && t >= previous, "storage times must be sorted and non-negative");
    previous = t;
    out.push_back({t, cross_correlation(m, t)});
  }
  return out;
}

}  // namespace muxmem
