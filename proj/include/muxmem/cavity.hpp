#pragma once

// Ring-cavity design relations for the write-photon enhancement cavity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "constants.hpp"
#include "errors.hpp"

namespace muxmem {

struct CavityParams {
  double transmission = 0.14;       ///< outcoupler T (reflectivity 1 - T)
  double roundtrip_loss = 0.11;     ///< intra-cavity roundtrip loss L
  double roundtrip_length_m = 0.877;

  void validate() const {
    detail::require(transmission > 0.0 && transmission < 1.0, "transmission must lie in (0,1)");
    detail::require(roundtrip_loss >= 0.0 && roundtrip_loss < 1.0, "roundtrip_loss must lie in [0,1)");
    detail::require(roundtrip_length_m > 0.0, "roundtrip_length_m must be > 0");
  }

  double reflectivity() const { return 1.0 - transmission; }

  bool operator==(const CavityParams&) const = default;
};

/// Write pulse with a Gaussian intensity envelope.
struct PulseSpec {
  double duration_fwhm_s = 266e-9;

  void validate() const { detail::require(duration_fwhm_s > 0.0, "pulse duration must be > 0"); }
  double sigma_s() const { return duration_fwhm_s / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

  bool operator==(const PulseSpec&) const = default;
};

/// F = pi ((1-T)(1-L))^(1/4) / (1 - ((1-T)(1-L))^(1/2))
inline double finesse(double transmission, double loss) {
  const double r = (1.0 - transmission) * (1.0 - loss);
  if (!(r < 1.0)) throw InvalidArgument("finesse diverges for a lossless cavity (T = L = 0)");
  detail::require(r > 0.0, "finesse requires (1-T)(1-L) > 0");
  return constants::pi * std::pow(r, 0.25) / (1.0 - std::sqrt(r));
}

inline double finesse(const CavityParams& cav) {
  cav.validate();
  return finesse(cav.transmission, cav.roundtrip_loss);
}

inline double escape_efficiency(double transmission, double loss) {
  detail::require(transmission + loss > 0.0, "escape efficiency requires T + L > 0");
  return transmission / (transmission + loss);
}

inline double escape_efficiency(const CavityParams& cav) {
  cav.validate();
  return escape_efficiency(cav.transmission, cav.roundtrip_loss);
}

inline double enhancement_from_finesse(double f) { return 2.0 * f / constants::pi; }

/// Write-photon emission enhancement 2F/pi; feeds MemoryParams::beta_ratio.
inline double enhancement_factor(const CavityParams& cav) { return enhancement_from_finesse(finesse(cav)); }

/// Multi-mode coincidence rate gain at equal multi-mode error: enhancement times escape efficiency.
inline double rate_gain(double transmission, double loss) {
  return enhancement_from_finesse(finesse(transmission, loss)) * escape_efficiency(transmission, loss);
}

inline double rate_gain(const CavityParams& cav) {
  cav.validate();
  return rate_gain(cav.transmission, cav.roundtrip_loss);
}

struct OutcouplerOptimum {
  double transmission;
  double gain;
};

/// Maximizes rate_gain over T in [t_min, t_max]: coarse grid for bracketing, then Brent.
inline OutcouplerOptimum optimal_outcoupler(double loss, double t_min = 1e-5, double t_max = 0.99) {
  detail::require(loss >= 0.0 && loss < 1.0, "loss must lie in [0,1)");
  detail::require(t_min > 0.0 && t_min < t_max && t_max < 1.0, "search range must satisfy 0 < T_min < T_max < 1");

  constexpr int grid = 512;
  // log spacing resolves the optimum T ~ L even for very small losses
  const double log_lo = std::log(t_min);
  const double step = (std::log(t_max) - log_lo) / grid;
  int best = 0;
  double best_gain = -1.0;
  for (int i = 0; i <= grid; ++i) {
    const double g = rate_gain(std::exp(log_lo + step * i), loss);
    if (g > best_gain) {
      best_gain = g;
      best = i;
    }
  }
  const double lo = std::exp(log_lo + step * std::max(best - 1, 0));
  const double hi = std::exp(log_lo + step * std::min(best + 1, grid));
  const auto [t_opt, neg_gain] = boost::math::tools::brent_find_minima(
      [loss](double t) { return -rate_gain(t, loss); }, lo, hi, std::numeric_limits<double>::digits);
  if (-neg_gain < best_gain) return {std::exp(log_lo + step * best), best_gain};
  return {t_opt, -neg_gain};
}

/// Free spectral range c / roundtrip length.
inline double fsr(const CavityParams& cav) {
  cav.validate();
  return constants::speed_of_light / cav.roundtrip_length_m;
}

inline double linewidth_from(double fsr_hz, double finesse_value) {
  detail::require(finesse_value > 0.0, "finesse must be positive");
  return fsr_hz / finesse_value;
}

/// Transmission FWHM in hertz.
inline double linewidth(const CavityParams& cav) { return linewidth_from(fsr(cav), finesse(cav)); }

/// Lorentzian approximation of the principal Airy resonance, unit peak.
inline double lorentzian_profile(double detuning_hz, double linewidth_hz) {
  const double x = 2.0 * detuning_hz / linewidth_hz;
  return 1.0 / (1.0 + x * x);
}

inline double transmission_spectrum(const CavityParams& cav, double detuning_hz) {
  return lorentzian_profile(detuning_hz, linewidth(cav));
}

/// Intensity-spectrum FWHM of a transform-limited Gaussian pulse: 2 ln2 / (pi dt).
inline double pulse_spectral_fwhm(const PulseSpec& pulse) {
  pulse.validate();
  return 2.0 * std::log(2.0) / (constants::pi * pulse.duration_fwhm_s);
}

/// Overlap of the normalized pulse power spectrum with a unit-peak Lorentzian
/// of width `linewidth_hz` centred at `detuning_hz`.
inline double spectral_overlap(double spectral_fwhm_hz, double linewidth_hz, double detuning_hz) {
  const double sigma = spectral_fwhm_hz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  // integrate in units of sigma; in hertz the adaptive error estimate is unreliable
  const double width = linewidth_hz / sigma;
  const double center = detuning_hz / sigma;
  auto integrand = [&](double u) {
    return std::exp(-0.5 * u * u) / std::sqrt(constants::two_pi) * lorentzian_profile(u - center, width);
  };
  const double half_span = 12.0;
  // split around the Lorentzian core so a resonance much narrower than the
  // pulse spectrum is not stepped over
  double cuts[4] = {-half_span, center - 5.0 * width, center + 5.0 * width, half_span};
  for (double& c : cuts) c = std::clamp(c, -half_span, half_span);
  double value = 0.0;
  for (int i = 0; i < 3; ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    value += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1], 30,
                                                                          1e-10);
  }
  return value;
}

/// Cavity enhancement seen by a finite-duration write pulse detuned from resonance.
inline double effective_enhancement(const CavityParams& cav, const PulseSpec& pulse, double cavity_detuning_hz) {
  const double enh = enhancement_factor(cav);
  return enh * spectral_overlap(pulse_spectral_fwhm(pulse), linewidth(cav), cavity_detuning_hz);
}

}  // namespace muxmem
