#pragma once

// Shared configuration for the proxy, the simulator and the experiment runner.

#include "fogroute/bandit.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fogroute {

enum class EnvironmentKind { local, cloud };

[[nodiscard]] std::string_view to_string(EnvironmentKind kind);
[[nodiscard]] EnvironmentKind parse_environment_kind(std::string_view name);

struct EnvironmentDescriptor {
  std::string id;
  EnvironmentKind kind = EnvironmentKind::cloud;
  std::string base_address;     // e.g. http://127.0.0.1:8101
  double request_timeout = 3.0; // seconds per attempt
  double latency_ms = 0.0;      // simulator only
};

struct FunctionSpec {
  std::string name;
  bool cloud_only = false;
  std::optional<std::string> pinned_environment;
  std::set<std::string> registered_environments;
  // Simulated service times in seconds, by environment kind.
  std::optional<double> local_service_time;
  double cloud_service_time = 0.0;
};

struct RoutingDefaults {
  bandit::Algorithm algorithm = bandit::Algorithm::ucb1;
  double epsilon = 0.1;
  double c = 2.0;
  // Milliseconds per unit of UCB1 exploration bonus.
  double exploration_unit_ms = 5.0;
};

struct SimulatorSettings {
  std::string admin_address = "127.0.0.1:8100";
  double scale = 1.0;
  double jitter_ms = 10.0;
  bool jitter = false;
  double bandwidth_penalty_ms = 2500.0; // applied when lag is injected
  double drop_hold_seconds = 10.0;      // how long dropped requests are held
  std::uint64_t seed = 1;
};

struct Config {
  std::vector<EnvironmentDescriptor> environments;
  std::vector<FunctionSpec> functions;
  RoutingDefaults defaults;
  SimulatorSettings simulator;
  std::filesystem::path log_path = "metrics.ndjson";
  std::string proxy_address = "127.0.0.1:8080";
  std::uint64_t seed = 1;

  [[nodiscard]] const EnvironmentDescriptor& environment(const std::string& id) const;
  [[nodiscard]] const EnvironmentDescriptor* find_environment(const std::string& id) const;
  [[nodiscard]] const FunctionSpec* find_function(const std::string& name) const;
  [[nodiscard]] const EnvironmentDescriptor& local_environment() const;
  [[nodiscard]] std::vector<std::string> environment_ids() const;

  /// Checks the cross-field invariants; throws std::invalid_argument.
  void validate() const;
};

/// Parses and validates. Functions without an explicit environment list are
/// registered everywhere they may run.
[[nodiscard]] Config config_from_json(const nlohmann::json& document);
[[nodiscard]] nlohmann::json config_to_json(const Config& config);
[[nodiscard]] Config load_config(const std::filesystem::path& path);

/// The three-environment, four-function setup used by the experiments.
[[nodiscard]] Config default_config();

/// Splits "host:port" or "http://host:port".
struct HostPort {
  std::string host;
  int port = 0;
};
[[nodiscard]] HostPort parse_host_port(std::string_view address);

} // namespace fogroute
