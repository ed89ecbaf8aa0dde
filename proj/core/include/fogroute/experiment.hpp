#pragma once

// Batch runner for the four routing experiments, plus the analysis and CSV
// output behind the per-iteration and cumulative-average charts.

#include "fogroute/bandit.hpp"
#include "fogroute/config.hpp"
#include "fogroute/simulator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fogroute::experiment {

enum class Scenario { exp1, exp2, exp3, exp4 };

[[nodiscard]] std::string_view to_string(Scenario scenario);
[[nodiscard]] Scenario parse_scenario(std::string_view name);

/// One simulator fault applied just before the given (1-based) iteration.
struct FaultAction {
  std::uint64_t iteration = 1;
  std::string environment;
  sim::Fault fault = sim::Fault::reachable;
  nlohmann::json value;
  std::optional<sim::UnreachableMode> mode;
};

struct ExperimentPlan {
  Scenario scenario = Scenario::exp1;
  std::uint64_t iterations = 99;
  std::vector<std::string> functions; // requested round-robin within an iteration
  bandit::Algorithm algorithm = bandit::Algorithm::ucb1;
  std::uint64_t seed = 1;
  std::vector<FaultAction> fault_schedule;
  double scale = 0.1;
  std::uint64_t warmup_iterations = 0;  // run first, not reported
  std::optional<double> remote_timeout; // seconds at reference scale
  bool jitter = false;

  /// Throws std::invalid_argument for out-of-range or conflicting faults.
  void validate() const;
  [[nodiscard]] std::vector<std::uint64_t> fault_iterations() const;
};

[[nodiscard]] nlohmann::ordered_json to_json(const ExperimentPlan& plan);
[[nodiscard]] ExperimentPlan plan_from_json(const nlohmann::json& document);

struct PlanOverrides {
  std::optional<std::uint64_t> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<bandit::Algorithm> algorithm;
  std::optional<std::uint64_t> warmup;
  std::optional<double> remote_timeout;
  std::optional<bool> jitter;
};

/// Protocol of each scenario over the given configuration.
[[nodiscard]] ExperimentPlan make_plan(Scenario scenario, const Config& config,
                                       const PlanOverrides& overrides = {});

struct IterationResult {
  std::uint64_t iteration = 0;
  std::string function;
  std::string chosen;  // head of the candidate list
  std::string serving; // swarm of the response, empty when the request failed
  double total_time = 0.0;
  bool fallback = false;
  bool ok = true;
  std::string outcome;

  friend bool operator==(const IterationResult&, const IterationResult&) = default;
};

struct InvokeReply {
  int status = 0;
  nlohmann::json body;
  std::string chosen;
  std::string serving;
  std::string outcome;
  double total_time = 0.0;
};

class ProxyUnreachable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ProxyEndpoint {
public:
  virtual ~ProxyEndpoint() = default;
  /// Throws ProxyUnreachable when no HTTP exchange happened.
  virtual InvokeReply invoke(const std::string& function, bandit::Algorithm algorithm) = 0;
};

class FaultController {
public:
  virtual ~FaultController() = default;
  virtual void inject(const FaultAction& action) = 0;
};

class HttpProxyEndpoint final : public ProxyEndpoint {
public:
  explicit HttpProxyEndpoint(std::string base_url);
  InvokeReply invoke(const std::string& function, bandit::Algorithm algorithm) override;
  [[nodiscard]] nlohmann::json weight_scale(const std::string& function,
                                            bandit::Algorithm algorithm) const;

private:
  std::string base_url_;
};

class HttpFaultController final : public FaultController {
public:
  explicit HttpFaultController(std::string admin_url);
  void inject(const FaultAction& action) override;

private:
  std::string admin_url_;
};

struct RunOutcome {
  std::vector<IterationResult> results;
  bool aborted = false;
  std::string error;
};

using ProgressCallback = std::function<void(const IterationResult&)>;

/// Issues requests strictly one at a time, applying scheduled faults before
/// their iteration. A proxy outage aborts the run and keeps partial results.
RunOutcome run(const ExperimentPlan& plan, ProxyEndpoint& proxy, FaultController& faults,
               const ProgressCallback& progress = {});

struct PhaseMean {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  double mean = 0.0;
  std::uint64_t count = 0;
};

struct FunctionReport {
  std::string function;
  std::uint64_t requests = 0;
  std::uint64_t failures = 0;
  std::uint64_t fallbacks = 0;
  std::map<std::string, double> serving_frequency;
  std::map<std::string, double> chosen_frequency;
  std::vector<PhaseMean> phases;
  std::vector<double> cumulative_average; // index i holds iterations 1..i+1
  std::optional<std::uint64_t> crossover;
};

struct Report {
  std::string scenario;
  std::string interleaving = "round_robin";
  std::string local_environment = "local";
  std::vector<std::uint64_t> fault_iterations;
  std::vector<FunctionReport> functions;

  [[nodiscard]] const FunctionReport& function(const std::string& name) const;
};

inline constexpr std::uint64_t crossover_window = 20;

/// Running mean of the series.
[[nodiscard]] std::vector<double> cumulative_average(const std::vector<double>& totals);

/// First iteration at or after the first fault whose trailing window is
/// served by the local environment in a strict majority.
[[nodiscard]] std::optional<std::uint64_t>
detect_crossover(const std::vector<IterationResult>& results, std::uint64_t fault_iteration,
                 const std::string& local_environment,
                 std::uint64_t window = crossover_window);

/// Fraction of successful requests in [first, last] served away from local.
[[nodiscard]] double remote_fraction(const std::vector<IterationResult>& results,
                                     std::uint64_t first, std::uint64_t last,
                                     const std::string& local_environment);

/// Results of one function, in iteration order.
[[nodiscard]] std::vector<IterationResult> for_function(const std::vector<IterationResult>& results,
                                                        const std::string& function);

/// Requires non-empty results; throws std::invalid_argument otherwise.
[[nodiscard]] Report summarize(const std::vector<IterationResult>& results,
                               const std::vector<std::uint64_t>& fault_iterations,
                               std::string scenario = {},
                               std::string local_environment = "local");

inline constexpr const char* iterations_file = "iterations.csv";
inline constexpr const char* cumulative_file = "cumulative.csv";
inline constexpr const char* summary_file = "summary.csv";
inline constexpr const char* plan_file = "plan.json";

[[nodiscard]] std::string iterations_csv(const std::vector<IterationResult>& results);
[[nodiscard]] std::string cumulative_csv(const Report& report);
[[nodiscard]] std::string summary_csv(const Report& report);

/// Writes the three CSV files into directory, creating it as needed.
/// Throws std::runtime_error on I/O failure.
void emit(const std::vector<IterationResult>& results, const Report& report,
          const std::filesystem::path& directory);

[[nodiscard]] std::vector<IterationResult> parse_iterations_csv(const std::string& text);
[[nodiscard]] std::vector<IterationResult> read_iterations(const std::filesystem::path& directory);

} // namespace fogroute::experiment
