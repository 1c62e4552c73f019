#pragma once

// Single-link quantum repeater arithmetic.

#include <cmath>

#include "constants.hpp"
#include "errors.hpp"

namespace muxmem {

struct LinkParams {
  double distance_m = 100e3;                          ///< elementary link length L0
  double signal_velocity_m_per_s = constants::fiber_velocity;
  int n_modes = 1;
  double herald_time_s = 0.0;     ///< arrival of the heralding signal
  double decision_delay_s = 0.0;  ///< processing delay before the read decision

  void validate() const {
    detail::require(distance_m > 0.0, "distance must be > 0");
    detail::require(signal_velocity_m_per_s > 0.0 && signal_velocity_m_per_s <= constants::speed_of_light,
                    "signal velocity must lie in (0, c]");
    detail::require(n_modes >= 1, "n_modes must be >= 1");
    detail::require(herald_time_s >= 0.0 && decision_delay_s >= 0.0, "herald time and decision delay must be >= 0");
  }

  bool operator==(const LinkParams&) const = default;
};

/// Attempt rate limited by signal travel over the link, v / L0.
inline double repetition_rate(const LinkParams& link) {
  link.validate();
  return link.signal_velocity_m_per_s / link.distance_m;
}

/// R (1 - (1 - q)^N): at least one of N modes succeeds per attempt.
inline double multiplexed_rate(const LinkParams& link, double per_mode_success) {
  detail::require(per_mode_success >= 0.0 && per_mode_success <= 1.0, "per-mode success must lie in [0,1]");
  if (per_mode_success == 1.0) return repetition_rate(link);
  // 1 - (1-q)^N without cancellation at small q
  return repetition_rate(link) * -std::expm1(link.n_modes * std::log1p(-per_mode_success));
}

/// Multiplexed rate over the single-mode rate R q; tends to N_m for small q.
inline double multiplexing_gain(const LinkParams& link, double per_mode_success) {
  detail::require(per_mode_success > 0.0, "gain undefined for zero success probability");
  return multiplexed_rate(link, per_mode_success) / (repetition_rate(link) * per_mode_success);
}

enum class ReadoutPolicyKind { immediate_reversal, freeze_release };

/// Time from writing until the read photon is retrieved.
///  immediate_reversal: 2 (tau + dt), the spin wave must rephase for as long as it dephased.
///  freeze_release:     tau + dt + dephasing interval before the freeze.
inline double readout_latency(const LinkParams& link, ReadoutPolicyKind policy, double dephasing_interval_s = 0.0) {
  detail::require(link.herald_time_s >= 0.0 && link.decision_delay_s >= 0.0,
                  "herald time and decision delay must be >= 0");
  detail::require(dephasing_interval_s >= 0.0, "dephasing interval must be >= 0");
  const double wait = link.herald_time_s + link.decision_delay_s;
  return policy == ReadoutPolicyKind::immediate_reversal ? 2.0 * wait : wait + dephasing_interval_s;
}

/// Storage time needed to read the full train of `n_modes` pulses after an
/// immediate reversal: the first mode rephases 2 N_m spacing after it was written.
inline double train_storage_requirement(int n_modes, double mode_spacing_s) {
  detail::require(n_modes >= 1 && mode_spacing_s > 0.0, "invalid train");
  return 2.0 * n_modes * mode_spacing_s;
}

}  // namespace muxmem
