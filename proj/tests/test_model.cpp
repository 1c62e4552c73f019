#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "muxmem/model.hpp"

using namespace muxmem;

namespace {

MemoryParams reference_point(int n_modes = 10, double beta = 14.0) {
  MemoryParams m;
  m.p = 0.045;
  m.eta_w = 0.3;
  m.eta_r = 0.25;
  m.p_int0 = 0.4;
  m.xi_eg = 1.0;
  m.beta_ratio = beta;
  m.n_modes = n_modes;
  return m;
}

// Draws parameter sets over the whole valid domain.
MemoryParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MemoryParams m;
  m.p = 1e-3 + 0.5 * unit(rng);
  m.eta_w = 0.01 + 0.99 * unit(rng);
  m.eta_r = 0.01 + 0.99 * unit(rng);
  m.p_int0 = 0.01 + 0.99 * unit(rng);
  m.xi_eg = 0.05 + 0.95 * unit(rng);
  m.beta_ratio = 1.0 + 100.0 * unit(rng);
  m.n_modes = 1 + static_cast<int>(unit(rng) * 50);
  m.tau_mem_s = 1e-6 + 1e-3 * unit(rng);
  m.decay = unit(rng) < 0.5 ? DecayLaw::exponential : DecayLaw::gaussian;
  return m;
}

// Reference g2 written directly from the photon-statistics expression.
double g2_oracle(double p, double p_int, int n, double xi, double beta) {
  return 1.0 + p_int * (1.0 - p) / (p * p_int + p * (n - p_int) * xi / beta);
}

// Largest N with g2 > threshold by exhaustive scan.
std::int64_t linear_scan_max_modes(MemoryParams m, double threshold, int limit = 100000) {
  std::int64_t best = 0;
  for (int n = 1; n <= limit; ++n) {
    m.n_modes = n;
    if (cross_correlation(m) > threshold)
      best = n;
    else
      break;
  }
  return best;
}

}  // namespace

TEST(MemoryParams, DecayLawsAgreeAtZeroAndTau) {
  MemoryParams m;
  m.tau_mem_s = 72e-6;
  for (auto law : {DecayLaw::exponential, DecayLaw::gaussian}) {
    m.decay = law;
    EXPECT_DOUBLE_EQ(m.p_int(0.0), m.p_int0);
    EXPECT_NEAR(m.p_int(m.tau_mem_s), m.p_int0 / std::exp(1.0), 1e-15);
  }
}

TEST(MemoryParams, RejectsOutOfRangeFields) {
  MemoryParams m;
  m.p = 1.5;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = {};
  m.beta_ratio = 0.5;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = {};
  m.n_modes = 0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = {};
  m.tau_mem_s = 0.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m = {};
  EXPECT_THROW(m.p_int(-1e-9), InvalidArgument);
}

TEST(WriteProb, Examples) {
  MemoryParams m = reference_point();
  m.p = 0.0;
  EXPECT_EQ(write_prob(m), 0.0);
  m.p = 0.045;
  m.eta_w = 1.0;
  EXPECT_DOUBLE_EQ(write_prob(m), 0.045);
  m.eta_w = 0.3;
  EXPECT_NEAR(write_prob(m), 0.0135, 1e-15);
}

TEST(ReadProb, Examples) {
  MemoryParams m = reference_point(1, std::numeric_limits<double>::infinity());
  m.p_int0 = 1.0;
  EXPECT_DOUBLE_EQ(read_prob(m), m.p * m.eta_r);

  EXPECT_NEAR(read_prob(reference_point(10, 14.0)), 0.045 * 0.25 * (0.4 + 9.6 / 14.0), 1e-15);
  EXPECT_NEAR(read_prob(reference_point(10, 14.0)), 0.012214, 1e-6);
  EXPECT_NEAR(read_prob(reference_point(10, 1.0)), 0.1125, 1e-12);
}

TEST(CoincidenceProb, Examples) {
  MemoryParams m = reference_point();
  EXPECT_NEAR(coincidence_prob(m), 0.003375 * (0.4 + 0.045 * 9.6 / 14.0), 1e-15);
  EXPECT_NEAR(coincidence_prob(m), 0.0014542, 1e-7);
  m.p_int0 = 1.0;
  m.n_modes = 1;
  EXPECT_DOUBLE_EQ(coincidence_prob(m), m.p * m.eta_w * m.eta_r);
  m.p = 0.0;
  EXPECT_EQ(coincidence_prob(m), 0.0);
}

TEST(RetrievalGivenWrite, Examples) {
  MemoryParams m = reference_point(1);
  m.p_int0 = 1.0;
  EXPECT_DOUBLE_EQ(retrieval_given_write(m), m.eta_r);
  EXPECT_NEAR(retrieval_given_write(reference_point(10, 14.0)), 0.25 * (0.4 + 0.045 * 9.6 / 14.0), 1e-15);
  EXPECT_NEAR(retrieval_given_write(reference_point(10, 14.0)), 0.107714, 1e-6);
  EXPECT_NEAR(retrieval_given_write(reference_point(10, 1.0)), 0.208, 1e-12);
  EXPECT_THROW(retrieval_given_write(m, -1.0), InvalidArgument);
}

TEST(NoiseGivenWrite, Examples) {
  MemoryParams m = reference_point(1);
  m.p_int0 = 1.0;
  EXPECT_EQ(noise_given_write(m), 0.0);
  EXPECT_NEAR(noise_given_write(reference_point(10, 14.0)), 0.0077143, 1e-7);
  const double base = noise_given_write(reference_point(10, 14.0));
  EXPECT_DOUBLE_EQ(noise_given_write(reference_point(10, 28.0)), base / 2.0);
  EXPECT_THROW(noise_given_write(m, -1.0), InvalidArgument);
}

TEST(CrossCorrelation, Examples) {
  MemoryParams m = reference_point(1);
  m.p = 0.1;
  m.p_int0 = 1.0;
  EXPECT_NEAR(cross_correlation(m), 10.0, 1e-12);
  EXPECT_NEAR(cross_correlation(reference_point(10, 14.0)), 1.0 + 0.382 / (0.045 * 0.4 + 0.045 * 9.6 / 14.0), 1e-12);
  EXPECT_NEAR(cross_correlation(reference_point(10, 14.0)), 8.819, 1e-3);
  EXPECT_NEAR(cross_correlation(reference_point(10, 1.0)), 1.0 + 0.382 / 0.45, 1e-12);
  EXPECT_NEAR(cross_correlation(reference_point(10, 1.0)), 1.849, 1e-3);
  m.p = 0.0;
  EXPECT_THROW(cross_correlation(m), UndefinedCorrelation);
}

TEST(CavityGain, Examples) {
  const auto with = reference_point(1, 14.0);
  const auto without = reference_point(1, 1.0);
  EXPECT_EQ(cavity_gain(with, with), 1.0);
  EXPECT_NEAR(cavity_gain(with, without), (0.4 + 0.6) / (0.4 + 0.6 / 14.0), 1e-12);
  EXPECT_NEAR(cavity_gain(with, without), 2.26, 0.02);

  auto w1 = with, w0 = without;
  w1.p_int0 = w0.p_int0 = 1.0;
  EXPECT_NEAR(cavity_gain(w1, w0), 1.0, 1e-12);

  auto other = without;
  other.eta_r = 0.5;
  EXPECT_THROW(cavity_gain(with, other), InvalidArgument);
}

TEST(MaxModes, ReferenceParametersGiveNineteen) {
  const auto m = reference_point(1, 14.0);
  EXPECT_EQ(max_modes(m, 5.8), ModeCapacity::finite(19));
  EXPECT_EQ(linear_scan_max_modes(m, 5.8), 19);
}

TEST(MaxModes, UnboundedWithoutDephasedNoise) {
  const auto m = reference_point(1, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(max_modes(m, 5.8).unbounded);
}

TEST(MaxModes, InfeasibleThresholdGivesZero) {
  auto m = reference_point(1, 14.0);
  // g2(N=1) = 1 + p_int (1-p) / (p p_int + p (1 - p_int) c)
  const double g2_single = cross_correlation(m);
  EXPECT_EQ(max_modes(m, g2_single + 1.0).modes, 0);
  EXPECT_EQ(max_modes(m, 1.0 / m.p + 10.0).modes, 0);
  EXPECT_THROW(max_modes(m, 1.0), InvalidArgument);
}

TEST(MaxModesProperty, ClosedFormMatchesLinearScan) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 400; ++i) {
    auto m = random_params(rng);
    m.n_modes = 1;
    const double threshold = 1.2 + 20.0 * unit(rng);
    const auto cap = max_modes(m, threshold);
    ASSERT_FALSE(cap.unbounded);
    if (cap.modes > 20000) continue;
    EXPECT_EQ(cap.modes, linear_scan_max_modes(m, threshold, 20001)) << "threshold " << threshold;
    ++checked;
  }
  EXPECT_GT(checked, 300);
}

TEST(MaxModesProperty, NonDecreasingInBetaAndPint) {
  auto m = reference_point(1);
  std::int64_t previous = -1;
  for (double beta = 1.0; beta <= 200.0; beta += 3.0) {
    const auto n = max_modes(m.with_beta_ratio(beta), 5.8).modes;
    EXPECT_GE(n, previous);
    previous = n;
  }
  previous = -1;
  for (double pi = 0.05; pi <= 1.0; pi += 0.05) {
    m.p_int0 = pi;
    const auto n = max_modes(m, 5.8).modes;
    EXPECT_GE(n, previous);
    previous = n;
  }
}

TEST(MaxModesProperty, LinearInBeta) {
  const auto m = reference_point(1);
  std::vector<double> x, y;
  for (double beta = 1.0; beta <= 81.0; beta += 10.0) {
    x.push_back(beta);
    y.push_back(static_cast<double>(max_modes(m.with_beta_ratio(beta), 5.8).modes));
  }
  const std::vector<double> expected{1, 15, 29, 42, 56, 70, 83, 97, 111};
  EXPECT_EQ(y, expected);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_GE(sxy * sxy / (sxx * syy), 0.995);
}

TEST(G2VsStorage, ConsistentAndDrops) {
  MemoryParams m = reference_point(1, 1.0);
  m.p = 0.1;
  m.tau_mem_s = 72e-6;
  const std::vector<double> times{0.0, 10e-6, 72e-6};
  const auto series = g2_vs_storage(m, times);
  ASSERT_EQ(series.size(), 3u);
  EXPECT_DOUBLE_EQ(series[0].g2, cross_correlation(m, 0.0));
  const double drop = 1.0 - (series[2].g2 - 1.0) / (series[0].g2 - 1.0);
  EXPECT_NEAR(drop, 0.63, 0.02);

  const auto cav = g2_vs_storage(m.with_beta_ratio(14.0), times);
  const double drop_cav = 1.0 - (cav[2].g2 - 1.0) / (cav[0].g2 - 1.0);
  EXPECT_NEAR(drop_cav, 0.217, 0.005);
  EXPECT_LE(drop_cav, 0.25);

  const std::vector<double> unsorted{1e-6, 0.0};
  EXPECT_THROW(g2_vs_storage(m, unsorted), InvalidArgument);
}

TEST(ModelProperty, CorrelationEqualsProbabilityRatio) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_params(rng);
    const double t = 2e-3 * unit(rng);
    const double ratio = coincidence_prob(m, t) / (write_prob(m) * read_prob(m, t));
    const double g2 = cross_correlation(m, t);
    EXPECT_NEAR(g2 / ratio - 1.0, 0.0, 1e-12);
    EXPECT_NEAR(g2 / g2_oracle(m.p, m.p_int(t), m.n_modes, m.xi_eg, m.beta_ratio) - 1.0, 0.0, 1e-12);
  }
}

TEST(ModelProperty, RetrievalDecomposition) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto m = random_params(rng);
    const double t = 2e-3 * unit(rng);
    EXPECT_EQ(retrieval_given_write(m, t), m.p_int(t) * m.eta_r + noise_given_write(m, t));
  }
}

TEST(ModelProperty, CorrelationDecreasesInModesTowardsOne) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    auto m = random_params(rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= 60; ++n) {
      const double g = cross_correlation(m.with_modes(n));
      if (m.p_int0 < n) {
        EXPECT_LT(g, previous);
      }
      previous = g;
    }
    EXPECT_LT(cross_correlation(m.with_modes(100000000)) - 1.0, 1e-3);
  }
}

TEST(ModelProperty, NoiseScalesReciprocallyWithBeta) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto m = random_params(rng);
    const double k = 1.0 + 10.0 * unit(rng);
    EXPECT_NEAR(noise_given_write(m.with_beta_ratio(m.beta_ratio * k)) * k / noise_given_write(m), 1.0, 1e-13);
  }
}

TEST(ModelProperty, CavityGainInvariantUnderEfficiencyRescaling) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    auto with = random_params(rng);
    with.beta_ratio = 1.0 + 50.0 * unit(rng);
    const auto without = with.with_beta_ratio(1.0);
    const double reference = cavity_gain(with, without);
    auto scaled = with;
    scaled.p *= 0.5;
    scaled.eta_w *= 0.5;
    scaled.eta_r *= 0.3;
    EXPECT_NEAR(cavity_gain(scaled, scaled.with_beta_ratio(1.0)), reference, 1e-12 * reference);
  }
}
