// stspec: spatiotemporal noise spectroscopy pipeline.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical or
// diagnostic failure (rejected fits, ill-conditioned inversion, ...).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stspec/stspec.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Options {
  std::string config;
  std::string out;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

int run(const std::string& command, const Options& o) {
  const auto cfg = stspec::load_config(o.config, o.seed);
  stspec::StageContext ctx{cfg, o.out.empty() ? cfg.output : o.out, o.threads, &std::cerr};
  if (command == "schedule") {
    const auto files = stspec::cmd_schedule(ctx);
    std::cerr << "schedule: wrote " << files.size() << " files\n";
    return 0;
  }
  if (command == "simulate" || command == "pipeline") stspec::cmd_simulate(ctx);
  if (command == "slopes" || command == "pipeline") {
    const auto outcome = stspec::cmd_slopes(ctx);
    for (const auto& f : outcome.failures) std::cerr << "  no linear trend: " << f << "\n";
    if (!outcome.failures.empty()) return kNumericalError;
  }
  if (command == "reconstruct" || command == "pipeline") {
    const auto res = stspec::cmd_reconstruct(ctx);
    for (int m : res.skipped) std::cerr << "  skipped harmonic m=" << m << " (ill-conditioned)\n";
    if (res.has_negative) std::cerr << "  warning: negative reconstructed values are flagged\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal dynamical-decoupling noise spectroscopy"};
  app.require_subcommand(1);
  Options o;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "compute attenuation grids for every required (k_p, omega_p)"},
      {"slopes", "fit spectroscopic slopes and assemble slope matrices"},
      {"reconstruct", "deconvolve slope matrices into spectral-density values"},
      {"pipeline", "simulate, slopes and reconstruct in sequence"},
      {"schedule", "write pulse schedules for every setting"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (default: the config's output)");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "override engine.seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const stspec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const stspec::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const stspec::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalError;
  }
}
