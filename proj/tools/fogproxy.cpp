// HTTP routing proxy. Replays the execution log on start, then serves
// /function, /weight_scale, /durations and /stats.

#include "signals.hpp"

#include <fogroute/config.hpp>
#include <fogroute/metrics_store.hpp>
#include <fogroute/proxy.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <set>

int main(int argc, char** argv) {
  CLI::App app{"fogroute proxy"};
  std::string config_path;
  std::string listen;
  std::string log_path;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "configuration file (defaults built in)");
  app.add_option("--listen", listen, "host:port, overrides proxy_address");
  app.add_option("--log", log_path, "execution log, overrides log_path");
  app.add_option("--seed", seed, "random seed, overrides seed");
  app.add_flag("-v,--verbose", verbose);
  CLI11_PARSE(app, argc, argv);

  if (verbose) {
    spdlog::set_level(spdlog::level::debug);
  }
  try {
    auto config = config_path.empty() ? fogroute::default_config()
                                      : fogroute::load_config(config_path);
    if (!listen.empty()) {
      config.proxy_address = listen;
    }
    if (!log_path.empty()) {
      config.log_path = log_path;
    }
    if (app.count("--seed") > 0) {
      config.seed = seed;
    }
    config.validate();

    const auto signals = fogroute::tools::block_shutdown_signals();
    const auto ids = config.environment_ids();
    fogroute::metrics::MetricsStore store(std::set<std::string>(ids.begin(), ids.end()),
                                          config.log_path);
    spdlog::info("replayed {} records from {}", store.record_count(), config.log_path.string());

    fogroute::proxy::HttpForwarder forwarder;
    fogroute::proxy::ProxyService service(config, store, forwarder, config.seed);
    fogroute::proxy::ProxyServer server(service);
    const auto bind = fogroute::parse_host_port(config.proxy_address);
    const int port = server.start(bind.host, bind.port);
    spdlog::info("proxy listening on {}:{}", bind.host, port);

    const int signal = fogroute::tools::wait_for_shutdown(signals);
    spdlog::info("signal {}, shutting down", signal);
    server.stop();
  } catch (const std::exception& error) {
    spdlog::error("{}", error.what());
    return 1;
  }
  return 0;
}
