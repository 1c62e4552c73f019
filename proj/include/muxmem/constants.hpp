#pragma once

#include <numbers>

namespace muxmem::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double speed_of_light = 299792458.0;     // m/s
inline constexpr double boltzmann = 1.380649e-23;         // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double rb87_mass = 86.909 * atomic_mass_unit;

/// Default fiber signal velocity, c/1.5.
inline constexpr double fiber_velocity = 2.0e8;

/// Two-photon Zeeman sensitivity of the |g>-|s> transition, Hz per gauss.
inline constexpr double zeeman_coeff_rb87 = 1.4e6;

inline constexpr double centimeters_per_meter = 100.0;

}  // namespace muxmem::constants
