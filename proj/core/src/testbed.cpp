#include "fogroute/testbed.hpp"

namespace fogroute {

TestbedOptions testbed_options(const experiment::ExperimentPlan& plan, Config config,
                               std::optional<std::filesystem::path> log_path) {
  TestbedOptions options;
  options.config = std::move(config);
  options.scale = plan.scale;
  options.seed = plan.seed;
  options.jitter = plan.jitter;
  options.remote_timeout = plan.remote_timeout;
  options.log_path = std::move(log_path);
  return options;
}

Testbed::Testbed(TestbedOptions options) : options_(std::move(options)) {
  options_.config.validate();

  sim::SimulatorOptions sim_options = sim::options_from(options_.config.simulator);
  sim_options.scale = options_.scale;
  sim_options.jitter = options_.jitter;
  sim_options.seed = options_.seed;
  simulator_ = std::make_unique<sim::Simulator>(options_.config, sim_options);

  std::map<std::string, HostPort> binds;
  for (const auto& env : options_.config.environments) {
    binds.emplace(env.id, HostPort{"127.0.0.1", 0});
  }
  simulator_server_ =
      std::make_unique<sim::SimulatorServer>(*simulator_, binds, HostPort{"127.0.0.1", 0});
  simulator_server_->start();

  proxy_config_ = options_.config;
  for (auto& env : proxy_config_.environments) {
    env.base_address = simulator_server_->address(env.id);
    if (env.kind == EnvironmentKind::cloud && options_.remote_timeout) {
      env.request_timeout = *options_.remote_timeout;
    }
    env.request_timeout *= options_.scale;
  }
  if (options_.log_path) {
    proxy_config_.log_path = *options_.log_path;
  }
  start_proxy();
}

Testbed::~Testbed() {
  stop_proxy();
  simulator_server_->stop();
}

void Testbed::stop_proxy() {
  if (server_) {
    server_->stop();
  }
  server_.reset();
  service_.reset();
  store_.reset();
}

void Testbed::start_proxy() {
  stop_proxy();
  const auto ids = proxy_config_.environment_ids();
  store_ = std::make_unique<metrics::MetricsStore>(std::set<std::string>(ids.begin(), ids.end()),
                                                   options_.log_path);
  // A restarted proxy draws a different random stream, like a new process.
  service_ = std::make_unique<proxy::ProxyService>(proxy_config_, *store_, forwarder_,
                                                   options_.seed + restarts_++);
  server_ = std::make_unique<proxy::ProxyServer>(*service_);
  proxy_port_ = server_->start("127.0.0.1", proxy_port_);
}

std::string Testbed::proxy_url() const {
  return "http://127.0.0.1:" + std::to_string(proxy_port_);
}

std::string Testbed::admin_url() const { return simulator_server_->admin_address(); }

experiment::RunOutcome run_in_testbed(const experiment::ExperimentPlan& plan,
                                      const Config& config,
                                      std::optional<std::filesystem::path> log_path,
                                      const experiment::ProgressCallback& progress) {
  Testbed testbed(testbed_options(plan, config, std::move(log_path)));
  experiment::HttpProxyEndpoint proxy(testbed.proxy_url());
  experiment::HttpFaultController faults(testbed.admin_url());
  return experiment::run(plan, proxy, faults, progress);
}

} // namespace fogroute
