#pragma once

// Simulated runtime environments: a local fog runtime and cloud servers that
// serve the sample functions after environment-dependent delays, with
// fault injection for reachability, latency and throttled bandwidth.

#include "fogroute/config.hpp"

#include <nlohmann/json.hpp>

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <stdexcept>
#include <string>

namespace fogroute::sim {

enum class Fault { reachable, latency, bandwidth_penalty };

/// How an unreachable environment fails: refuse closes the listener so
/// connections are rejected at once; drop accepts and never answers, which
/// is what a cut uplink looks like to the caller.
enum class UnreachableMode { refuse, drop };

[[nodiscard]] Fault parse_fault(std::string_view name);
[[nodiscard]] std::string_view to_string(Fault fault);
[[nodiscard]] UnreachableMode parse_unreachable_mode(std::string_view name);
[[nodiscard]] std::string_view to_string(UnreachableMode mode);

struct SimulatedEnvironment {
  std::string id;
  EnvironmentKind kind = EnvironmentKind::cloud;
  double base_latency_ms = 0.0;
  bool reachable = true;
  UnreachableMode unreachable_mode = UnreachableMode::refuse;
  double bandwidth_penalty_ms = 0.0;
};

struct FunctionProfile {
  std::string name;
  std::optional<double> local_service_time; // absent for cloud-only functions
  double cloud_service_time = 0.0;
  bool cloud_only = false;
};

struct SimulatorOptions {
  double scale = 1.0;
  bool jitter = false;
  double jitter_ms = 10.0; // standard deviation before scaling
  double drop_hold_seconds = 10.0;
  std::uint64_t seed = 1;
};

[[nodiscard]] SimulatorOptions options_from(const SimulatorSettings& settings);

class EnvironmentUnreachable : public std::runtime_error {
public:
  EnvironmentUnreachable(const std::string& environment, UnreachableMode mode)
      : std::runtime_error("environment unreachable: " + environment), mode_(mode) {}
  [[nodiscard]] UnreachableMode mode() const { return mode_; }

private:
  UnreachableMode mode_;
};

class NotFound : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Simulator {
public:
  using ReachabilityListener = std::function<void(const SimulatedEnvironment&)>;

  Simulator(const Config& config, SimulatorOptions options);
  ~Simulator();

  /// Body in the sample-function shape: nodeInfo, swarm, message, status.
  [[nodiscard]] static nlohmann::ordered_json response_body(const std::string& environment,
                                                            const std::string& function);

  /// Scaled delay without jitter, in seconds. Throws NotFound.
  [[nodiscard]] double planned_delay(const std::string& environment,
                                     const std::string& function) const;

  /// Blocks for the environment's delay and returns the response body.
  /// Throws EnvironmentUnreachable or NotFound.
  nlohmann::ordered_json serve(const std::string& environment, const std::string& function,
                               const nlohmann::json& payload);

  /// Reachability takes a boolean value; latency and bandwidth penalty take
  /// milliseconds at reference scale. Throws std::invalid_argument.
  void inject(const std::string& environment, Fault fault, const nlohmann::json& value,
              std::optional<UnreachableMode> mode = std::nullopt);

  [[nodiscard]] SimulatedEnvironment state(const std::string& environment) const;
  [[nodiscard]] std::vector<SimulatedEnvironment> states() const;
  [[nodiscard]] const SimulatorOptions& options() const { return options_; }

  /// Holds a dropped request until the environment becomes reachable, the
  /// hold time elapses or the simulator shuts down.
  void hold_dropped(const std::string& environment);
  void shutdown();

  void set_reachability_listener(ReachabilityListener listener);

private:
  [[nodiscard]] double jitter_seconds();

  SimulatorOptions options_;
  std::map<std::string, FunctionProfile> profiles_;

  mutable std::shared_mutex state_mutex_;
  std::map<std::string, SimulatedEnvironment> environments_;

  std::mutex rng_mutex_;
  std::mt19937_64 rng_;

  std::mutex hold_mutex_;
  std::condition_variable hold_cv_;
  bool shutting_down_ = false;

  std::mutex listener_mutex_;
  ReachabilityListener listener_;
};

/// HTTP front of a simulator: one listener per environment plus an admin
/// listener. Port 0 binds an ephemeral port.
class SimulatorServer {
public:
  SimulatorServer(Simulator& simulator, std::map<std::string, HostPort> environment_binds,
                  HostPort admin_bind);
  ~SimulatorServer();

  SimulatorServer(const SimulatorServer&) = delete;
  SimulatorServer& operator=(const SimulatorServer&) = delete;

  void start();
  void stop();

  [[nodiscard]] int port(const std::string& environment) const;
  [[nodiscard]] int admin_port() const;
  [[nodiscard]] std::string address(const std::string& environment) const;
  [[nodiscard]] std::string admin_address() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace fogroute::sim
