#include <cmath>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "golden_support.hpp"

using namespace muxmem;

namespace {

std::string header_of(const std::string& csv) { return csv.substr(0, csv.find('\n')); }

const char* const expected_headers[][2] = {
    {"mode-sweep", "beta_ratio,n_modes,g2"},
    {"max-modes", "p_int0,beta_ratio,max_modes"},
    {"cavity-design", "roundtrip_loss,reflectivity,finesse,escape_efficiency,rate_gain"},
    {"pulse-enhancement", "pulse_fwhm_s,detuning_hz,enhancement"},
    {"echo", "pulse_fwhm_s,time_s,efficiency"},
    {"protocol-run", "n_modes,p_w_total,p_wr_total,g2_avg,g2_stderr"},
    {"crosstalk", "write_mode,read_mode,g2,g2_stderr"},
    {"storage-decay", "time_s,g2_cavity,g2_nocavity"},
    {"repeater-rate", "distance_m,n_modes,repetition_rate_hz,multiplexed_rate_hz,multiplexing_gain"},
};

}  // namespace

class GoldenScenario : public ::testing::TestWithParam<int> {};

TEST_P(GoldenScenario, MatchesPinnedCsv) {
  const std::string name = expected_headers[GetParam()][0];
  const auto c = golden::compare(name);
  EXPECT_EQ(header_of(c.actual), expected_headers[GetParam()][1]);
  EXPECT_TRUE(c.match) << name << " differs from its golden file";
}

TEST_P(GoldenScenario, RunsAreDeterministic) {
  const auto cfg = golden::config(expected_headers[GetParam()][0]);
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  EXPECT_EQ(to_csv(a.table), to_csv(b.table));
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
  EXPECT_EQ(a.summary.at("schema_version"), output_schema_version);
  EXPECT_EQ(a.summary.at("scenario"), expected_headers[GetParam()][0]);
}

TEST_P(GoldenScenario, ConfigRoundTrips) {
  const auto cfg = golden::config(expected_headers[GetParam()][0]);
  EXPECT_EQ(parse_config(serialize_config(cfg)), cfg);
}

INSTANTIATE_TEST_SUITE_P(AllScenarios, GoldenScenario, ::testing::Range(0, 9),
                         [](const auto& info) {
                           std::string n = expected_headers[info.param][0];
                           for (auto& ch : n)
                             if (ch == '-') ch = '_';
                           return n;
                         });

TEST(Scenarios, EveryScenarioHasAHeader) {
  EXPECT_EQ(std::size(expected_headers), std::size(scenario_names));
}

TEST(CavityDesign, SummaryValues) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::cavity_design;
  cfg.sweep.reflectivity_points = 3;
  const auto r = run_scenario(cfg);
  EXPECT_NEAR(r.summary.at("finesse").get<double>(), 23.4836, 1e-3);
  EXPECT_NEAR(r.summary.at("escape_efficiency").get<double>(), 0.56, 1e-12);
  EXPECT_NEAR(r.summary.at("gain_max").get<double>(), 8.58, 0.01);
  EXPECT_EQ(r.table.rows.size(), 6u);
  EXPECT_EQ(r.table.rows.front()[1], 0.01);
  EXPECT_EQ(r.table.rows.back()[1], 0.99);
}

TEST(ModeSweep, FamiliesDecreaseInModesAndIncreaseInBeta) {
  const auto r = run_scenario(golden::config("mode-sweep"));
  const int n = r.summary.at("max_modes").get<int>();
  for (std::size_t i = 0; i < r.table.rows.size(); ++i) {
    if (i % n == 0) continue;
    EXPECT_LT(r.table.rows[i][2], r.table.rows[i - 1][2]);
  }
  for (std::size_t i = n; i < r.table.rows.size(); ++i) EXPECT_GT(r.table.rows[i][2], r.table.rows[i - n][2]);
}

TEST(MaxModes, SummaryAndFit) {
  const auto r = run_scenario(golden::config("max-modes"));
  EXPECT_EQ(r.summary.at("max_modes").get<int>(), 19);
  const auto& fit = r.summary.at("linear_fits").at(0);
  EXPECT_GE(fit.at("r_squared").get<double>(), 0.995);
}

TEST(StorageDecay, SummaryDrops) {
  const auto r = run_scenario(golden::config("storage-decay"));
  EXPECT_NEAR(r.summary.at("drop_at_tau_nocavity").get<double>(), 0.63, 0.02);
  EXPECT_LE(r.summary.at("drop_at_tau_cavity").get<double>(), 0.25);
  EXPECT_NEAR(r.summary.at("gain_at_zero").get<double>(), 2.26, 0.02);
}

TEST(RepeaterRate, SummaryValues) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::repeater_rate;
  cfg.link.herald_time_s = 10e-6;
  cfg.link.decision_delay_s = 2e-6;
  const auto r = run_scenario(cfg);
  EXPECT_DOUBLE_EQ(r.summary.at("repetition_rate_hz").get<double>(), 2000.0);
  EXPECT_DOUBLE_EQ(r.summary.at("latency_immediate_s").get<double>(), 24e-6);
  EXPECT_NEAR(r.summary.at("storage_for_100_modes_s").get<double>(), 160e-6, 1e-15);
}

TEST(Csv, FormatsNumbersAndEmptyTables) {
  Table t;
  t.columns = {"a", "b"};
  EXPECT_EQ(to_csv(t), "a,b\n");
  t.add({0.1, std::numeric_limits<double>::infinity()});
  t.add({-2.0, std::nan("")});
  EXPECT_EQ(to_csv(t), "a,b\n0.1,inf\n-2,nan\n");
  EXPECT_THROW(t.add({1.0}), InvalidArgument);
}

TEST(Emit, UnwritablePathThrowsIoError) {
  Table t;
  t.columns = {"x"};
  const auto missing = std::filesystem::temp_directory_path() / "muxmem-no-such-dir" / "sub" / "out.csv";
  EXPECT_THROW(emit_csv(t, missing.string()), IoError);
  EXPECT_THROW(emit_json(nlohmann::json::object(), missing.string()), IoError);
}

TEST(FitLine, ExactLine) {
  const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_THROW(fit_line({1}, {1}), InvalidArgument);
}
