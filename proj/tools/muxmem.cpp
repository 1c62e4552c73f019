// muxmem <scenario> --config <path> [--out <dir>] [--seed <u64>] [--trials <n>]
//
// Writes <out>/<scenario>.csv and <out>/<scenario>.json.
// Exit codes: 0 ok, 2 config error, 3 model error, 4 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "muxmem/muxmem.hpp"

namespace {

enum ExitCode { ok = 0, config_error = 2, model_error = 3, io_error = 4 };

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw muxmem::IoError("cannot read config " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplexed cavity-enhanced DLCZ memory scenarios"};
  std::string scenario_name;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trials;

  std::string names;
  for (auto n : muxmem::scenario_names) names += (names.empty() ? "" : ", ") + std::string(n);
  app.add_option("scenario", scenario_name, "one of: " + names)->required();
  app.add_option("--config", config_path, "scenario config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides output_path)");
  app.add_option("--seed", seed, "RNG seed (overrides rng_seed)");
  app.add_option("--trials", trials, "Monte Carlo trials (overrides trials)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config_error;
  }

  try {
    const auto scenario = muxmem::scenario_from_string(scenario_name);
    if (!scenario) throw muxmem::ConfigError("scenario", "unknown scenario \"" + scenario_name + "\"");

    auto cfg = muxmem::parse_config(read_file(config_path), scenario);
    if (out_dir) cfg.output_path = *out_dir;
    if (seed) cfg.rng_seed = *seed;
    if (trials) cfg.trials = *trials;

    const auto result = muxmem::run_scenario(cfg);

    const std::filesystem::path dir(cfg.output_path);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw muxmem::IoError("cannot create " + dir.string() + ": " + ec.message());
    const std::string stem = std::string(muxmem::to_string(cfg.scenario));
    muxmem::emit_csv(result.table, (dir / (stem + ".csv")).string());
    muxmem::emit_json(result.summary, (dir / (stem + ".json")).string());
    std::cout << (dir / (stem + ".csv")).string() << '\n';
    return ok;
  } catch (const muxmem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const muxmem::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return io_error;
  } catch (const muxmem::Error& e) {
    std::cerr << "error in " << scenario_name << ": " << e.what() << '\n';
    return model_error;
  } catch (const std::exception& e) {
    std::cerr << "error in " << scenario_name << ": " << e.what() << '\n';
    return model_error;
  }
}
