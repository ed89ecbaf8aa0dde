#pragma once

// The request proxy: weighs the runtime environments of a function, forwards
// the invocation to the cheapest one, falls back to the local environment
// when a remote attempt fails, and records what it measured.

#include "fogroute/bandit.hpp"
#include "fogroute/config.hpp"
#include "fogroute/metrics_store.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fogroute::proxy {

class UnknownFunction : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Per-request routing options. Unset fields fall back to the configured
/// defaults.
struct InvocationOptions {
  std::optional<bandit::Algorithm> algorithm;
  std::optional<std::string> force_target;
  std::optional<double> epsilon;
  std::optional<double> c;
};

/// Throws std::invalid_argument on unknown algorithms or mistyped fields.
[[nodiscard]] InvocationOptions options_from_json(const nlohmann::json& options);
[[nodiscard]] nlohmann::json to_json(const InvocationOptions& options);

enum class SelectionReason { forced, pinned, cold_start, weighted };
[[nodiscard]] std::string_view to_string(SelectionReason reason);

/// Head is the chosen environment, the tail is the fallback chain.
struct Selection {
  std::vector<std::string> candidates;
  SelectionReason reason = SelectionReason::weighted;
  std::optional<bandit::WeightReport> weights;
};

/// Environments a function may be routed to, in configuration order.
[[nodiscard]] std::vector<std::string> candidate_environments(const Config& config,
                                                              const FunctionSpec& function);

[[nodiscard]] bandit::WeightParams weight_params(const Config& config,
                                                 const InvocationOptions& options);

/// Pure routing decision over a snapshot of the function's arms. Throws
/// std::invalid_argument for a forced target the function cannot run on.
[[nodiscard]] Selection select_environment(const Config& config, const FunctionSpec& function,
                                           const InvocationOptions& options,
                                           const bandit::ArmTable& arms, std::mt19937_64& rng);

[[nodiscard]] bandit::WeightReport weight_scale(const Config& config,
                                                const FunctionSpec& function,
                                                bandit::Algorithm algorithm,
                                                const bandit::WeightParams& params,
                                                const bandit::ArmTable& arms);

inline constexpr std::string_view cold_start_marker = "cold_start";

/// {"status":"success", "<env>": weight | "cold_start", ...} in the given
/// environment order.
[[nodiscard]] nlohmann::ordered_json weight_report_json(const bandit::WeightReport& report,
                                                        const std::vector<std::string>& order);

struct ForwardResult {
  bool ok = false;
  int http_status = 0;
  std::string body;           // upstream body, passed through on success
  nlohmann::json parsed;      // body as JSON when it parsed
  double duration = 0.0;      // seconds from forward start to response complete
  std::string error;
};

class Forwarder {
public:
  virtual ~Forwarder() = default;
  /// Never throws for upstream trouble; failures come back with ok = false.
  virtual ForwardResult forward(const EnvironmentDescriptor& environment,
                                const std::string& function, const std::string& payload) = 0;
};

/// POSTs {base_address}/function/{name} with the environment's timeout
/// applied to connect, read and write.
class HttpForwarder final : public Forwarder {
public:
  ForwardResult forward(const EnvironmentDescriptor& environment, const std::string& function,
                        const std::string& payload) override;
};

struct Attempt {
  std::string environment;
  bool ok = false;
  double duration = 0.0;
  std::string error;
};

struct InvokeResult {
  int http_status = 200;
  std::string body;
  std::string chosen;
  std::optional<std::string> serving;
  metrics::Outcome outcome = metrics::Outcome::success;
  Selection selection;
  std::vector<Attempt> attempts;
};

class ProxyService {
public:
  ProxyService(Config config, metrics::MetricsStore& store, Forwarder& forwarder,
               std::uint64_t seed);

  /// Throws UnknownFunction and std::invalid_argument for request errors.
  /// Upstream failures are reported through InvokeResult (502).
  InvokeResult invoke(const std::string& function, const std::string& payload,
                      const InvocationOptions& options);

  [[nodiscard]] Selection select(const std::string& function, const InvocationOptions& options);

  [[nodiscard]] bandit::WeightReport weight_scale(const std::string& function,
                                                  const InvocationOptions& options) const;

  [[nodiscard]] const Config& config() const { return config_; }
  [[nodiscard]] metrics::MetricsStore& store() { return store_; }
  [[nodiscard]] const FunctionSpec& function_spec(const std::string& function) const;

private:
  Config config_;
  metrics::MetricsStore& store_;
  Forwarder& forwarder_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Response headers carrying routing metadata; the body stays the upstream's.
inline constexpr const char* header_chosen = "X-Fogroute-Chosen";
inline constexpr const char* header_serving = "X-Fogroute-Serving";
inline constexpr const char* header_outcome = "X-Fogroute-Outcome";
inline constexpr const char* header_candidates = "X-Fogroute-Candidates";

class ProxyServer {
public:
  explicit ProxyServer(ProxyService& service);
  ~ProxyServer();

  ProxyServer(const ProxyServer&) = delete;
  ProxyServer& operator=(const ProxyServer&) = delete;

  /// Port 0 binds an ephemeral port; returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  [[nodiscard]] int port() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace fogroute::proxy
