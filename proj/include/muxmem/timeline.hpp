#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace muxmem {

struct GradientSegment {
  double t_start_s = 0.0;
  double gradient_gauss_per_cm = 0.0;

  bool operator==(const GradientSegment&) const = default;
};

/// Piecewise-constant magnetic gradient schedule A(t) with a uniform bias field
/// and a phenomenological linear drift A(t) -> A(t) (1 + drift_rate t).
///
/// The last segment extends to +inf. Times before the first segment evaluate
/// with the first segment's amplitude.
struct FieldTimeline {
  std::vector<GradientSegment> segments{GradientSegment{}};
  double bias_gauss = 0.0;
  double drift_rate_per_s = 0.0;

  void validate() const {
    detail::require(!segments.empty(), "timeline needs at least one segment");
    detail::require(segments.front().t_start_s == 0.0, "first timeline segment must start at t = 0");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      detail::require(std::isfinite(segments[i].gradient_gauss_per_cm), "gradient must be finite");
      if (i > 0)
        detail::require(segments[i].t_start_s > segments[i - 1].t_start_s,
                        "timeline segment start times must be strictly increasing");
    }
    detail::require(std::isfinite(bias_gauss) && std::isfinite(drift_rate_per_s), "bias and drift must be finite");
  }

  std::size_t segment_index(double t) const {
    const auto it = std::upper_bound(segments.begin(), segments.end(), t,
                                     [](double value, const GradientSegment& s) { return value < s.t_start_s; });
    return it == segments.begin() ? 0 : static_cast<std::size_t>(it - segments.begin()) - 1;
  }

  /// Programmed amplitude, without drift.
  double programmed_gradient(double t) const { return segments[segment_index(t)].gradient_gauss_per_cm; }

  double gradient(double t) const { return programmed_gradient(t) * (1.0 + drift_rate_per_s * t); }

  double segment_end(std::size_t index) const {
    return index + 1 < segments.size() ? segments[index + 1].t_start_s : std::numeric_limits<double>::infinity();
  }

  FieldTimeline without_drift() const {
    FieldTimeline copy = *this;
    copy.drift_rate_per_s = 0.0;
    return copy;
  }

  /// +A from t = 0, reversed to -A at t_reverse.
  static FieldTimeline reversal(double amplitude, double t_reverse, double drift_rate = 0.0) {
    FieldTimeline tl;
    tl.segments = {{0.0, amplitude}, {t_reverse, -amplitude}};
    tl.drift_rate_per_s = drift_rate;
    tl.validate();
    return tl;
  }

  /// +A until t_freeze, nulled until t_release, -A afterwards.
  static FieldTimeline freeze_release(double amplitude, double t_freeze, double t_release, double drift_rate = 0.0) {
    FieldTimeline tl;
    tl.segments = {{0.0, amplitude}, {t_freeze, 0.0}, {t_release, -amplitude}};
    tl.drift_rate_per_s = drift_rate;
    tl.validate();
    return tl;
  }

  static FieldTimeline constant(double amplitude) {
    FieldTimeline tl;
    tl.segments = {{0.0, amplitude}};
    return tl;
  }

  bool operator==(const FieldTimeline&) const = default;
};

/// Integrals of the drifting gradient over [origin, t]:
///   area         = int A(t')(1 + d t') dt'                [G/cm s]
///   first_moment = int A(t')(1 + d t')(t' - origin) dt'    [G/cm s^2]
struct GradientMoments {
  double area = 0.0;
  double first_moment = 0.0;
};

inline GradientMoments gradient_moments(const FieldTimeline& timeline, double origin, double t) {
  detail::require(t >= origin, "moment interval must satisfy t >= origin");
  GradientMoments m;
  const double d = timeline.drift_rate_per_s;
  for (std::size_t k = timeline.segment_index(origin); k < timeline.segments.size(); ++k) {
    const double a = std::max(origin, k == 0 ? -std::numeric_limits<double>::infinity()
                                             : timeline.segments[k].t_start_s);
    const double b = std::min(t, timeline.segment_end(k));
    if (b <= a) {
      if (timeline.segments[k].t_start_s >= t) break;
      continue;
    }
    const double g = timeline.segments[k].gradient_gauss_per_cm;
    if (g != 0.0) {
      // shift to s = t' - origin: (1 + d origin + d s) s
      const double sa = a - origin;
      const double sb = b - origin;
      const double c0 = 1.0 + d * origin;
      m.area += g * (c0 * (sb - sa) + d * (sb * sb - sa * sa) / 2.0);
      m.first_moment += g * (c0 * (sb * sb - sa * sa) / 2.0 + d * (sb * sb * sb - sa * sa * sa) / 3.0);
    }
    if (b >= t) break;
  }
  return m;
}

namespace detail {

/// First x in (a, b] where start + g ((x - a) + d (x^2 - a^2) / 2) vanishes.
/// The drift term makes this a quadratic whose sign can change twice inside one
/// segment, so an endpoint sign test is not enough.
inline std::optional<double> first_root(double start, double g, double d, double a, double b) {
  if (d == 0.0) {
    const double x = a - start / g;
    if (x > a && x <= b) return x;
    return std::nullopt;
  }
  // in u = x - a: (g d / 2) u^2 + g (1 + d a) u + start = 0
  const double qa = g * d / 2.0;
  const double qb = g * (1.0 + d * a);
  const double disc = qb * qb - 4.0 * qa * start;
  if (disc < 0.0) return std::nullopt;
  const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
  double best = std::numeric_limits<double>::infinity();
  for (double u : {q / qa, q != 0.0 ? start / q : std::numeric_limits<double>::quiet_NaN()})
    if (u > 0.0 && a + u <= b) best = std::min(best, u);
  if (std::isinf(best)) return std::nullopt;
  return a + best;
}

}  // namespace detail

/// Smallest t > write_time at which the position-proportional phase integral
/// int_{write_time}^{t} A(t')(1 + d t') dt' returns to zero after the spin
/// wave has dephased. Closed-form root within the crossing segment.
inline double rephasing_time(const FieldTimeline& timeline, double write_time, double horizon_s = 1e-3) {
  timeline.validate();
  detail::require(horizon_s > 0.0, "horizon must be positive");
  const double end = write_time + horizon_s;
  const double d = timeline.drift_rate_per_s;
  double integral = 0.0;
  bool dephased = false;
  double a = write_time;
  for (std::size_t k = timeline.segment_index(write_time); k < timeline.segments.size() && a < end; ++k) {
    const double b = std::min(timeline.segment_end(k), end);
    const double g = timeline.segments[k].gradient_gauss_per_cm;
    const double start = integral;
    const double seg_a = a;
    auto accumulated = [&](double x) { return start + g * ((x - seg_a) + d * (x * x - seg_a * seg_a) / 2.0); };
    if (dephased && g != 0.0) {
      if (const auto root = detail::first_root(start, g, d, a, b)) return *root;
    }
    const double at_b = accumulated(b);
    integral = at_b;
    if (integral != 0.0) dephased = true;
    a = b;
  }
  throw NoRephasing("phase integral does not return to zero within " + std::to_string(horizon_s) +
                    " s of write time " + std::to_string(write_time) + " s");
}

}  // namespace muxmem
