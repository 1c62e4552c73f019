#pragma once

// Multimode write/read scheduling and the stochastic trial engine.
//
// Each trial draws, per temporal mode, a spin wave (Bernoulli p) and a write
// click (Bernoulli eta_w given the spin wave). A read of mode j yields a
// coherent photon with probability p_int(t_j) eta_r when that spin wave exists,
// plus a thermally distributed number of noise photons with the dephased-noise
// mean. Detectors are photon-number resolving: photon tallies are what the
// estimators consume, click tallies (>= 1 photon) are kept alongside.
//
// Even trial indices are correlation passes (read according to the readout
// policy), odd ones are normalization passes that read one mode unconditionally
// so p_r is estimated from an independent sample.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "detail/parallel.hpp"
#include "detail/rng.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "timeline.hpp"

namespace muxmem {

// ---------------------------------------------------------------------------
// Schedule

struct ImmediateReversal {
  bool operator==(const ImmediateReversal&) const = default;
};

/// Gradient nulled at t_freeze and reversed at t_release.
struct FreezeRelease {
  double t_freeze_s = 0.0;
  double t_release_s = 0.0;
  bool operator==(const FreezeRelease&) const = default;
};

using ReversalPolicy = std::variant<ImmediateReversal, FreezeRelease>;

struct ModeSchedule {
  int n_modes = 1;
  double mode_spacing_s = 800e-9;
  double write_duration_s = 266e-9;
  ReversalPolicy policy = ImmediateReversal{};
  double reversal_time_s = 0.0;        ///< instant the rephasing gradient is applied
  std::vector<double> write_times_s;   ///< write pulse centres
  std::vector<double> readout_times_s; ///< programmed feed-forward read times

  double storage_time(int mode) const { return readout_times_s.at(mode) - write_times_s.at(mode); }
};

/// Reversal instant for a train of `n_modes` pulses: one pulse duration after the last centre.
inline double train_reversal_time(int n_modes, double mode_spacing_s, double write_duration_s) {
  return (n_modes - 1) * mode_spacing_s + write_duration_s;
}

/// Readout times are the drift-free rephasing times of each mode, i.e. what a
/// calibration would program; drift in `timeline` only affects the physics.
inline ModeSchedule build_schedule(int n_modes, double mode_spacing_s, double write_duration_s,
                                   const FieldTimeline& timeline, ReversalPolicy policy = ImmediateReversal{}) {
  detail::require(n_modes >= 1, "n_modes must be >= 1");
  detail::require(mode_spacing_s > 0.0 && write_duration_s > 0.0, "mode spacing and write duration must be positive");
  detail::require(n_modes == 1 || write_duration_s < mode_spacing_s, "write duration must be shorter than mode spacing");
  timeline.validate();

  ModeSchedule s;
  s.n_modes = n_modes;
  s.mode_spacing_s = mode_spacing_s;
  s.write_duration_s = write_duration_s;
  s.policy = policy;
  for (int m = 0; m < n_modes; ++m) s.write_times_s.push_back(m * mode_spacing_s);
  const double last_write = s.write_times_s.back();

  if (const auto* fr = std::get_if<FreezeRelease>(&policy)) {
    detail::require(fr->t_freeze_s > last_write && fr->t_release_s > fr->t_freeze_s,
                    "freeze must follow the last write and precede the release");
    detail::require(timeline.programmed_gradient(fr->t_freeze_s) == 0.0,
                    "timeline gradient must vanish during the freeze interval");
    detail::require(timeline.programmed_gradient(fr->t_release_s) * timeline.programmed_gradient(last_write) < 0.0,
                    "timeline must reverse the gradient at release");
    s.reversal_time_s = fr->t_release_s;
  } else {
    const double sign_at_write = timeline.programmed_gradient(last_write);
    detail::require(sign_at_write != 0.0, "gradient must be on during writing");
    std::optional<double> reversal;
    for (const auto& seg : timeline.segments) {
      if (seg.t_start_s > last_write && seg.gradient_gauss_per_cm * sign_at_write < 0.0) {
        reversal = seg.t_start_s;
        break;
      }
    }
    if (!reversal) throw NoRephasing("timeline never reverses the gradient after the last write");
    s.reversal_time_s = *reversal;
  }

  const FieldTimeline programmed = timeline.without_drift();
  for (double tw : s.write_times_s) {
    const double t_read = rephasing_time(programmed, tw);
    detail::require(t_read > s.reversal_time_s, "readout must follow the reversal instant");
    s.readout_times_s.push_back(t_read);
  }
  return s;
}

/// Gradient +A during the train, then either reversed immediately or nulled
/// for `freeze_duration_s` and reversed at release.
struct TrainLayout {
  FieldTimeline timeline;
  ReversalPolicy policy;
};

inline TrainLayout train_layout(int n_modes, double mode_spacing_s, double write_duration_s, double gradient,
                                double drift_rate, double freeze_duration_s = 0.0) {
  const double t_end = train_reversal_time(n_modes, mode_spacing_s, write_duration_s);
  if (freeze_duration_s > 0.0) {
    return {FieldTimeline::freeze_release(gradient, t_end, t_end + freeze_duration_s, drift_rate),
            FreezeRelease{t_end, t_end + freeze_duration_s}};
  }
  return {FieldTimeline::reversal(gradient, t_end, drift_rate), ImmediateReversal{}};
}

inline ModeSchedule build_train(int n_modes, double mode_spacing_s, double write_duration_s, const TrainLayout& layout) {
  return build_schedule(n_modes, mode_spacing_s, write_duration_s, layout.timeline, layout.policy);
}

// ---------------------------------------------------------------------------
// Tallies

template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

/// Photon-number moments of heralded reads split on a virtual 50:50 beamsplitter.
struct SplitMoments {
  std::uint64_t heralded_reads = 0;
  std::uint64_t a = 0;      ///< sum n_A
  std::uint64_t b = 0;      ///< sum n_B
  std::uint64_t ab = 0;     ///< sum n_A n_B
  std::uint64_t a2 = 0;     ///< sum n_A^2
  std::uint64_t b2 = 0;     ///< sum n_B^2
  std::uint64_t ab2 = 0;    ///< sum (n_A n_B)^2
  std::uint64_t ab_a = 0;   ///< sum n_A^2 n_B
  std::uint64_t ab_b = 0;   ///< sum n_A n_B^2
  std::uint64_t a_clicks = 0;
  std::uint64_t b_clicks = 0;
  std::uint64_t both_clicks = 0;

  void record(std::uint64_t na, std::uint64_t nb) {
    ++heralded_reads;
    a += na;
    b += nb;
    ab += na * nb;
    a2 += na * na;
    b2 += nb * nb;
    ab2 += na * nb * na * nb;
    ab_a += na * na * nb;
    ab_b += na * nb * nb;
    a_clicks += na > 0;
    b_clicks += nb > 0;
    both_clicks += (na > 0 && nb > 0);
  }

  SplitMoments& operator+=(const SplitMoments& o) {
    heralded_reads += o.heralded_reads;
    a += o.a;
    b += o.b;
    ab += o.ab;
    a2 += o.a2;
    b2 += o.b2;
    ab2 += o.ab2;
    ab_a += o.ab_a;
    ab_b += o.ab_b;
    a_clicks += o.a_clicks;
    b_clicks += o.b_clicks;
    both_clicks += o.both_clicks;
    return *this;
  }

  bool operator==(const SplitMoments&) const = default;
};

enum class ReadoutKind { feed_forward, fixed_mode, all_heralded };

struct FeedForward {};
struct FixedMode {
  int mode = 0;
};
/// Reads every heralded mode at its programmed time (per-train coincidence totals).
struct AllHeralded {};

using ReadoutPolicy = std::variant<FeedForward, FixedMode, AllHeralded>;

struct CountsTally {
  int n_modes = 0;
  ReadoutKind readout = ReadoutKind::feed_forward;
  int fixed_mode = -1;

  std::uint64_t n_trials = 0;
  std::uint64_t correlation_trials = 0;
  std::uint64_t normalization_trials = 0;

  std::vector<std::uint64_t> write_counts;   ///< write clicks per mode, correlation passes
  std::vector<std::uint64_t> herald_counts;  ///< heralds that triggered/conditioned a read

  Matrix<std::uint64_t> coincidence_counts;     ///< (herald, read): trials with write click and read click
  Matrix<std::uint64_t> coincidence_photons;    ///< sum w_i n_j
  Matrix<std::uint64_t> coincidence_photons_sq; ///< sum w_i n_j^2

  std::vector<std::uint64_t> read_trials;  ///< correlation-pass reads per mode
  std::vector<std::uint64_t> read_counts;  ///< read clicks
  std::vector<std::uint64_t> read_photons;

  std::vector<std::uint64_t> unconditional_trials;
  std::vector<std::uint64_t> unconditional_read_counts;
  std::vector<std::uint64_t> unconditional_read_photons;
  std::vector<std::uint64_t> unconditional_read_photons_sq;

  std::vector<SplitMoments> split_read_counts;  ///< per read mode, heralded reads only

  static CountsTally empty(int n_modes, ReadoutKind kind, int fixed_mode = -1) {
    const auto n = static_cast<std::size_t>(n_modes);
    CountsTally t;
    t.n_modes = n_modes;
    t.readout = kind;
    t.fixed_mode = fixed_mode;
    t.write_counts.assign(n, 0);
    t.herald_counts.assign(n, 0);
    t.coincidence_counts = Matrix<std::uint64_t>(n, n);
    t.coincidence_photons = Matrix<std::uint64_t>(n, n);
    t.coincidence_photons_sq = Matrix<std::uint64_t>(n, n);
    t.read_trials.assign(n, 0);
    t.read_counts.assign(n, 0);
    t.read_photons.assign(n, 0);
    t.unconditional_trials.assign(n, 0);
    t.unconditional_read_counts.assign(n, 0);
    t.unconditional_read_photons.assign(n, 0);
    t.unconditional_read_photons_sq.assign(n, 0);
    t.split_read_counts.assign(n, {});
    return t;
  }

  CountsTally& operator+=(const CountsTally& o) {
    detail::require(n_modes == o.n_modes && readout == o.readout && fixed_mode == o.fixed_mode,
                    "cannot merge tallies of different runs");
    auto add = [](auto& lhs, const auto& rhs) {
      for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] += rhs[i];
    };
    n_trials += o.n_trials;
    correlation_trials += o.correlation_trials;
    normalization_trials += o.normalization_trials;
    add(write_counts, o.write_counts);
    add(herald_counts, o.herald_counts);
    add(coincidence_counts.data, o.coincidence_counts.data);
    add(coincidence_photons.data, o.coincidence_photons.data);
    add(coincidence_photons_sq.data, o.coincidence_photons_sq.data);
    add(read_trials, o.read_trials);
    add(read_counts, o.read_counts);
    add(read_photons, o.read_photons);
    add(unconditional_trials, o.unconditional_trials);
    add(unconditional_read_counts, o.unconditional_read_counts);
    add(unconditional_read_photons, o.unconditional_read_photons);
    add(unconditional_read_photons_sq, o.unconditional_read_photons_sq);
    add(split_read_counts, o.split_read_counts);
    return *this;
  }

  bool operator==(const CountsTally&) const = default;
};

// ---------------------------------------------------------------------------
// Trial engine

struct TrialOptions {
  unsigned workers = 0;  ///< 0: hardware concurrency (capped by MUXMEM_THREADS)
  /// Per-mode multiplier on p_int at readout (imperfect rephasing); empty means 1.
  std::vector<double> rephasing_fidelity;
};

namespace detail {

struct ModeReadModel {
  double coherent = 0.0;    // p_int(t) * fidelity * eta_r
  double noise_mean = 0.0;  // thermal mean photon number
};

inline std::vector<ModeReadModel> read_models(const MemoryParams& mem, const ModeSchedule& schedule,
                                              const std::vector<double>& fidelity) {
  std::vector<ModeReadModel> out(static_cast<std::size_t>(schedule.n_modes));
  for (int m = 0; m < schedule.n_modes; ++m) {
    const double f = fidelity.empty() ? 1.0 : fidelity[m];
    const double p_int = mem.p_int(schedule.storage_time(m)) * f;
    out[m].coherent = p_int * mem.eta_r;
    out[m].noise_mean = mem.p * (mem.n_modes - p_int) * mem.noise_coefficient() * mem.eta_r;
  }
  return out;
}

struct ReadOutcome {
  std::uint64_t photons = 0;
  std::uint64_t arm_a = 0;
  std::uint64_t arm_b = 0;
};

inline ReadOutcome read_mode(Stream& rng, const ModeReadModel& model, bool spin_wave) {
  ReadOutcome r;
  const bool coherent = rng.bernoulli(model.coherent);
  r.photons = (spin_wave && coherent ? 1 : 0) + rng.thermal(model.noise_mean);
  r.arm_a = rng.binomial(r.photons, 0.5);
  r.arm_b = r.photons - r.arm_a;
  return r;
}

inline void simulate_trial(std::uint64_t seed, std::uint64_t index, const MemoryParams& mem,
                           const std::vector<ModeReadModel>& models, const ReadoutPolicy& policy,
                           std::vector<char>& spin, std::vector<char>& wclick, CountsTally& t) {
  Stream rng(seed, index);
  const int n = t.n_modes;
  for (int m = 0; m < n; ++m) {
    spin[m] = rng.bernoulli(mem.p);
    const bool detected = rng.bernoulli(mem.eta_w);
    wclick[m] = spin[m] && detected;
  }
  ++t.n_trials;

  if (index % 2 == 1) {
    int r = 0;
    if (const auto* fixed = std::get_if<FixedMode>(&policy))
      r = fixed->mode;
    else
      r = static_cast<int>((index / 2) % static_cast<std::uint64_t>(n));
    const auto out = read_mode(rng, models[r], spin[r]);
    ++t.normalization_trials;
    ++t.unconditional_trials[r];
    t.unconditional_read_counts[r] += out.photons > 0;
    t.unconditional_read_photons[r] += out.photons;
    t.unconditional_read_photons_sq[r] += out.photons * out.photons;
    return;
  }

  ++t.correlation_trials;
  for (int m = 0; m < n; ++m) t.write_counts[m] += wclick[m];

  auto record_read = [&](int r, const ReadOutcome& out) {
    ++t.read_trials[r];
    t.read_counts[r] += out.photons > 0;
    t.read_photons[r] += out.photons;
  };
  auto record_coincidence = [&](int h, int r, const ReadOutcome& out) {
    t.coincidence_counts(h, r) += out.photons > 0;
    t.coincidence_photons(h, r) += out.photons;
    t.coincidence_photons_sq(h, r) += out.photons * out.photons;
  };

  if (std::holds_alternative<FeedForward>(policy)) {
    for (int h = 0; h < n; ++h) {
      if (!wclick[h]) continue;
      ++t.herald_counts[h];
      const auto out = read_mode(rng, models[h], spin[h]);
      record_read(h, out);
      record_coincidence(h, h, out);
      t.split_read_counts[h].record(out.arm_a, out.arm_b);
      break;
    }
  } else if (const auto* fixed = std::get_if<FixedMode>(&policy)) {
    const int r = fixed->mode;
    const auto out = read_mode(rng, models[r], spin[r]);
    record_read(r, out);
    for (int h = 0; h < n; ++h) {
      if (!wclick[h]) continue;
      ++t.herald_counts[h];
      record_coincidence(h, r, out);
    }
    if (wclick[r]) t.split_read_counts[r].record(out.arm_a, out.arm_b);
  } else {
    for (int h = 0; h < n; ++h) {
      if (!wclick[h]) continue;
      ++t.herald_counts[h];
      const auto out = read_mode(rng, models[h], spin[h]);
      record_read(h, out);
      record_coincidence(h, h, out);
      t.split_read_counts[h].record(out.arm_a, out.arm_b);
    }
  }
}

inline ReadoutKind readout_kind(const ReadoutPolicy& policy) {
  if (std::holds_alternative<FeedForward>(policy)) return ReadoutKind::feed_forward;
  if (std::holds_alternative<FixedMode>(policy)) return ReadoutKind::fixed_mode;
  return ReadoutKind::all_heralded;
}

}  // namespace detail

/// Runs `n_trials` independent trials. Trial k draws from substream (seed, k),
/// so the tally is identical for any worker count.
inline CountsTally run_trials(const MemoryParams& mem, const ModeSchedule& schedule, std::uint64_t n_trials,
                              std::uint64_t seed, const ReadoutPolicy& policy = FeedForward{},
                              const TrialOptions& options = {}) {
  mem.validate();
  detail::require(n_trials >= 1, "n_trials must be >= 1");
  if (mem.n_modes != schedule.n_modes)
    throw InvalidArgument("memory n_modes (" + std::to_string(mem.n_modes) + ") does not match schedule n_modes (" +
                          std::to_string(schedule.n_modes) + ")");
  detail::require(options.rephasing_fidelity.empty() ||
                      options.rephasing_fidelity.size() == static_cast<std::size_t>(schedule.n_modes),
                  "rephasing_fidelity must have one entry per mode");
  int fixed_mode = -1;
  if (const auto* fixed = std::get_if<FixedMode>(&policy)) {
    detail::require(fixed->mode >= 0 && fixed->mode < schedule.n_modes, "fixed readout mode out of range");
    fixed_mode = fixed->mode;
  }

  const auto models = detail::read_models(mem, schedule, options.rephasing_fidelity);
  const auto kind = detail::readout_kind(policy);
  const unsigned workers = detail::resolve_workers(options.workers);
  std::vector<CountsTally> partial(workers, CountsTally::empty(schedule.n_modes, kind, fixed_mode));
  detail::parallel_chunks(n_trials, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
    std::vector<char> spin(schedule.n_modes);
    std::vector<char> wclick(schedule.n_modes);
    for (std::size_t k = begin; k < end; ++k)
      detail::simulate_trial(seed, k, mem, models, policy, spin, wclick, partial[w]);
  });
  CountsTally total = CountsTally::empty(schedule.n_modes, kind, fixed_mode);
  for (const auto& p : partial) total += p;
  return total;
}

// ---------------------------------------------------------------------------
// Estimators

/// Value with a one-standard-error bar. `defined == false` marks an estimate
/// whose denominator had zero counts. When `one_sided` is set the value is 0
/// (no counts observed) and `std_error` is the value one count would have given.
struct Estimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  double std_error = 0.0;
  bool defined = false;
  bool one_sided = false;

  static Estimate undefined() { return {}; }
  static Estimate of(double v, double e) { return {v, e, true, false}; }
};

struct CellStatistics {
  int herald_mode = 0;
  int read_mode = 0;
  Estimate p_wr;
  Estimate p_r_given_w;
  Estimate g2;
};

struct TallyStatistics {
  std::vector<Estimate> p_w;  ///< per herald mode: heralds per correlation trial
  std::vector<Estimate> p_r;  ///< per read mode: unconditional read photons per trial
  std::vector<CellStatistics> cells;

  const CellStatistics* cell(int herald, int read) const {
    for (const auto& c : cells)
      if (c.herald_mode == herald && c.read_mode == read) return &c;
    return nullptr;
  }
};

namespace detail {

inline Estimate binomial_rate(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) return Estimate::undefined();
  const double n = static_cast<double>(trials);
  const double p = successes / n;
  return Estimate::of(p, std::sqrt(std::max(p * (1.0 - p), 0.0) / n));
}

inline Estimate moment_rate(std::uint64_t sum, std::uint64_t sum_sq, std::uint64_t trials) {
  if (trials == 0) return Estimate::undefined();
  const double n = static_cast<double>(trials);
  const double mean = sum / n;
  return Estimate::of(mean, std::sqrt(std::max(sum_sq / n - mean * mean, 0.0) / n));
}

// g2 = X / (Y Z): X = mean(w n), Y = mean(w) over the same trials, Z an
// independent mean. First-order propagation using Cov(X, Y) = X (1 - Y) / n.
inline CellStatistics cell_statistics(const CountsTally& t, int h, int r) {
  CellStatistics c;
  c.herald_mode = h;
  c.read_mode = r;
  const std::uint64_t n_corr = t.correlation_trials;
  const std::uint64_t n_norm = t.unconditional_trials[r];
  c.p_wr = moment_rate(t.coincidence_photons(h, r), t.coincidence_photons_sq(h, r), n_corr);
  if (n_corr == 0 || t.herald_counts[h] == 0) return c;

  const double n = static_cast<double>(n_corr);
  const double x = c.p_wr.value;
  const double y = t.herald_counts[h] / n;
  const double var_x = c.p_wr.std_error * c.p_wr.std_error;
  const double ratio_rel2 = x > 0.0 ? std::max(var_x / (x * x) - (1.0 - y) / (n * y), 0.0) : 0.0;
  if (x > 0.0) {
    c.p_r_given_w = Estimate::of(x / y, x / y * std::sqrt(ratio_rel2));
  } else {
    c.p_r_given_w = {0.0, 1.0 / (n * y), true, true};
  }

  if (n_norm == 0 || t.unconditional_read_photons[r] == 0) return c;
  const Estimate z = moment_rate(t.unconditional_read_photons[r], t.unconditional_read_photons_sq[r], n_norm);
  const double g = x / (y * z.value);
  if (x > 0.0) {
    const double rel2 = ratio_rel2 + (z.std_error * z.std_error) / (z.value * z.value);
    c.g2 = Estimate::of(g, g * std::sqrt(rel2));
  } else {
    c.g2 = {0.0, (1.0 / n) / (y * z.value), true, true};
  }
  return c;
}

}  // namespace detail

/// p_w, p_r, p_{w,r}, p_{r|w} and g2 = p_{w,r} / (p_w p_r) for every exercised cell.
inline TallyStatistics estimate_statistics(const CountsTally& t) {
  detail::require(t.n_trials > 0, "tally has no trials");
  TallyStatistics s;
  for (int m = 0; m < t.n_modes; ++m) {
    s.p_w.push_back(detail::binomial_rate(t.herald_counts[m], t.correlation_trials));
    s.p_r.push_back(detail::moment_rate(t.unconditional_read_photons[m], t.unconditional_read_photons_sq[m],
                                        t.unconditional_trials[m]));
  }
  if (t.readout == ReadoutKind::fixed_mode) {
    for (int h = 0; h < t.n_modes; ++h) s.cells.push_back(detail::cell_statistics(t, h, t.fixed_mode));
  } else {
    for (int m = 0; m < t.n_modes; ++m) s.cells.push_back(detail::cell_statistics(t, m, m));
  }
  return s;
}

/// g2_{r,r|w} = <n_A n_B> / (<n_A><n_B>) over heralded reads of all modes.
inline Estimate heralded_autocorrelation(const CountsTally& t) {
  SplitMoments s;
  for (const auto& m : t.split_read_counts) s += m;
  if (s.heralded_reads == 0 || s.a == 0 || s.b == 0) return Estimate::undefined();
  const double h = static_cast<double>(s.heralded_reads);
  const double a = s.a / h;
  const double b = s.b / h;
  const double c = s.ab / h;
  if (s.ab == 0) return {0.0, 1.0 / h / (a * b), true, true};
  const double g = c / (a * b);
  const double var_c = s.ab2 / h - c * c;
  const double var_a = s.a2 / h - a * a;
  const double var_b = s.b2 / h - b * b;
  const double cov_ca = s.ab_a / h - c * a;
  const double cov_cb = s.ab_b / h - c * b;
  const double cov_ab = c - a * b;
  const double rel2 = (var_c / (c * c) + var_a / (a * a) + var_b / (b * b) - 2.0 * cov_ca / (c * a) -
                       2.0 * cov_cb / (c * b) + 2.0 * cov_ab / (a * b)) /
                      h;
  return Estimate::of(g, g * std::sqrt(std::max(rel2, 0.0)));
}

// ---------------------------------------------------------------------------
// Composite experiments

struct CrosstalkResult {
  Matrix<Estimate> g2;      ///< (write mode, read mode)
  Matrix<double> accidental;  ///< p_w(i) p_r(j), the expected uncorrelated coincidence rate

  /// Pooled ratio sum(p_wr) / sum(p_w p_r) over diagonal (or off-diagonal)
  /// entries. Weights do not depend on the measured coincidences, so the
  /// average of uncorrelated cells stays centred on 1.
  double weighted_average(bool diagonal) const {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < g2.rows; ++i)
      for (std::size_t j = 0; j < g2.cols; ++j) {
        if ((i == j) != diagonal) continue;
        const auto& e = g2(i, j);
        if (!e.defined) continue;
        const double w = accidental(i, j);
        num += w * e.value;
        den += w;
      }
    return den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Entry (i, j): g2 between a write click in mode i and the read of mode j at
/// mode j's rephasing time. One fixed-mode run of `n_trials` per read mode.
inline CrosstalkResult crosstalk_matrix(const MemoryParams& mem, const ModeSchedule& schedule, std::uint64_t n_trials,
                                        std::uint64_t seed, const TrialOptions& options = {}) {
  const auto n = static_cast<std::size_t>(schedule.n_modes);
  CrosstalkResult result{Matrix<Estimate>(n, n), Matrix<double>(n, n)};
  for (int j = 0; j < schedule.n_modes; ++j) {
    const auto tally = run_trials(mem, schedule, n_trials, detail::substream_key(seed, static_cast<std::uint64_t>(j)),
                                  FixedMode{j}, options);
    const auto stats = estimate_statistics(tally);
    for (int i = 0; i < schedule.n_modes; ++i) {
      result.g2(i, j) = stats.cell(i, j)->g2;
      result.accidental(i, j) = stats.p_w[i].value * stats.p_r[j].value;
    }
  }
  return result;
}

struct ScalingSpec {
  int max_modes = 10;
  double mode_spacing_s = 800e-9;
  double write_duration_s = 266e-9;
  double gradient_gauss_per_cm = 10.0;
  double drift_rate_per_s = 0.0;
  double freeze_duration_s = 0.0;  ///< > 0 selects freeze-release
};

struct ScalingRow {
  int n_modes = 0;
  Estimate p_w_total;   ///< write clicks per train
  Estimate p_wr_total;  ///< write-read coincidences per train, all modes
  Estimate g2_avg;      ///< sum of coincidences over sum of p_w p_r
};

/// Train-size sweep N_m = 1..max_modes with every heralded mode read at its
/// programmed time. Each mode's p_int is multiplied by the ensemble's
/// rephasing fidelity at that time under the drifting gradient.
inline std::vector<ScalingRow> coincidence_scaling(const MemoryParams& mem, const ScalingSpec& spec,
                                                   const AtomEnsemble& ensemble, std::uint64_t n_trials,
                                                   std::uint64_t seed, const TrialOptions& options = {}) {
  detail::require(spec.max_modes >= 1, "max_modes must be >= 1");
  std::vector<ScalingRow> rows;
  for (int n = 1; n <= spec.max_modes; ++n) {
    const auto layout = train_layout(n, spec.mode_spacing_s, spec.write_duration_s, spec.gradient_gauss_per_cm,
                                     spec.drift_rate_per_s, spec.freeze_duration_s);
    const auto& timeline = layout.timeline;
    const auto schedule = build_train(n, spec.mode_spacing_s, spec.write_duration_s, layout);
    TrialOptions opts = options;
    opts.rephasing_fidelity.clear();
    for (int m = 0; m < n; ++m)
      opts.rephasing_fidelity.push_back(
          rephasing_fidelity(ensemble, timeline, schedule.write_times_s[m], schedule.readout_times_s[m]));
    const auto tally = run_trials(mem.with_modes(n), schedule, n_trials,
                                  detail::substream_key(seed, static_cast<std::uint64_t>(n)), AllHeralded{}, opts);

    const double trials = static_cast<double>(tally.correlation_trials);
    double pw = 0.0, pw_var = 0.0, pwr = 0.0, pwr_var = 0.0, accidental = 0.0, accidental_var = 0.0;
    for (int m = 0; m < n; ++m) {
      const auto y = detail::binomial_rate(tally.write_counts[m], tally.correlation_trials);
      const auto x = detail::moment_rate(tally.coincidence_photons(m, m), tally.coincidence_photons_sq(m, m),
                                         tally.correlation_trials);
      const auto z = detail::moment_rate(tally.unconditional_read_photons[m], tally.unconditional_read_photons_sq[m],
                                         tally.unconditional_trials[m]);
      pw += y.value;
      pw_var += y.std_error * y.std_error;
      pwr += x.value;
      pwr_var += x.std_error * x.std_error;
      if (z.defined) {
        accidental += y.value * z.value;
        accidental_var += z.value * z.value * y.std_error * y.std_error + y.value * y.value * z.std_error * z.std_error;
      }
    }
    ScalingRow row;
    row.n_modes = n;
    row.p_w_total = trials > 0 ? Estimate::of(pw, std::sqrt(pw_var)) : Estimate::undefined();
    row.p_wr_total = trials > 0 ? Estimate::of(pwr, std::sqrt(pwr_var)) : Estimate::undefined();
    if (accidental > 0.0 && pwr > 0.0) {
      const double g = pwr / accidental;
      row.g2_avg = Estimate::of(g, g * std::sqrt(pwr_var / (pwr * pwr) + accidental_var / (accidental * accidental)));
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace muxmem
