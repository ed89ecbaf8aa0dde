#pragma once

// In-process simulator plus proxy on loopback ports, wired the way the
// experiments expect. Every time-like setting is multiplied by the scale.

#include "fogroute/config.hpp"
#include "fogroute/experiment.hpp"
#include "fogroute/metrics_store.hpp"
#include "fogroute/proxy.hpp"
#include "fogroute/simulator.hpp"

#include <filesystem>
#include <memory>
#include <optional>

namespace fogroute {

struct TestbedOptions {
  Config config = default_config();
  double scale = 1.0;
  std::uint64_t seed = 1;
  bool jitter = false;
  std::optional<double> remote_timeout; // seconds at reference scale
  std::optional<std::filesystem::path> log_path;
};

[[nodiscard]] TestbedOptions testbed_options(const experiment::ExperimentPlan& plan,
                                             Config config,
                                             std::optional<std::filesystem::path> log_path);

class Testbed {
public:
  explicit Testbed(TestbedOptions options);
  ~Testbed();

  Testbed(const Testbed&) = delete;
  Testbed& operator=(const Testbed&) = delete;

  [[nodiscard]] std::string proxy_url() const;
  [[nodiscard]] std::string admin_url() const;

  /// Configuration the proxy runs with: simulator addresses and scaled timeouts.
  [[nodiscard]] const Config& proxy_config() const { return proxy_config_; }

  [[nodiscard]] sim::Simulator& simulator() { return *simulator_; }
  [[nodiscard]] proxy::ProxyService& proxy() { return *service_; }
  [[nodiscard]] metrics::MetricsStore& store() { return *store_; }

  /// Tears the proxy and its store down, as a process exit would.
  void stop_proxy();
  /// Brings a fresh proxy up on the same port, rebuilt from the log.
  void start_proxy();

private:
  TestbedOptions options_;
  Config proxy_config_;
  std::unique_ptr<sim::Simulator> simulator_;
  std::unique_ptr<sim::SimulatorServer> simulator_server_;
  proxy::HttpForwarder forwarder_;
  std::unique_ptr<metrics::MetricsStore> store_;
  std::unique_ptr<proxy::ProxyService> service_;
  std::unique_ptr<proxy::ProxyServer> server_;
  int proxy_port_ = 0;
  std::uint64_t restarts_ = 0;
};

/// Runs a plan end to end against a fresh testbed.
experiment::RunOutcome run_in_testbed(const experiment::ExperimentPlan& plan, const Config& config,
                                      std::optional<std::filesystem::path> log_path = std::nullopt,
                                      const experiment::ProgressCallback& progress = {});

} // namespace fogroute
