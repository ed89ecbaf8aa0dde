// Simulated local and cloud runtimes on the ports named in the configuration,
// plus the fault-injection admin endpoint.

#include "signals.hpp"

#include <fogroute/config.hpp>
#include <fogroute/simulator.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

int main(int argc, char** argv) {
  CLI::App app{"fogroute runtime simulator"};
  std::string config_path;
  double scale = 0.0;
  std::uint64_t seed = 0;
  bool jitter = false;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "configuration file (defaults built in)");
  app.add_option("--scale", scale, "time scale factor")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "jitter seed");
  app.add_flag("--jitter", jitter, "enable Gaussian jitter");
  app.add_flag("-v,--verbose", verbose);
  CLI11_PARSE(app, argc, argv);

  if (verbose) {
    spdlog::set_level(spdlog::level::debug);
  }
  try {
    auto config = config_path.empty() ? fogroute::default_config()
                                      : fogroute::load_config(config_path);
    auto options = fogroute::sim::options_from(config.simulator);
    if (app.count("--scale") > 0) {
      options.scale = scale;
    }
    if (app.count("--seed") > 0) {
      options.seed = seed;
    }
    options.jitter = options.jitter || jitter;

    std::map<std::string, fogroute::HostPort> binds;
    for (const auto& env : config.environments) {
      binds.emplace(env.id, fogroute::parse_host_port(env.base_address));
    }

    const auto signals = fogroute::tools::block_shutdown_signals();
    fogroute::sim::Simulator simulator(config, options);
    fogroute::sim::SimulatorServer server(simulator, binds,
                                          fogroute::parse_host_port(config.simulator.admin_address));
    server.start();
    for (const auto& env : config.environments) {
      spdlog::info("{} on {}", env.id, server.address(env.id));
    }
    spdlog::info("admin on {} (scale {}, jitter {})", server.admin_address(), options.scale,
                 options.jitter ? "on" : "off");

    fogroute::tools::wait_for_shutdown(signals);
    server.stop();
  } catch (const std::exception& error) {
    spdlog::error("{}", error.what());
    return 1;
  }
  return 0;
}
