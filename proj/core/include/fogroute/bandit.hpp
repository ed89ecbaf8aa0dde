#pragma once

// Exploration-vs-exploitation weighting over observed execution durations.
//
// Durations are costs: lower is better and the environment with the least
// weight is selected. Every confidence bonus is therefore subtracted from
// the mean so that rarely tried environments look cheaper than their
// estimate, which is the cost-side mirror of optimism under uncertainty.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fogroute::bandit {

/// Incremental moments of the durations observed for one arm.
struct ArmStats {
  std::uint64_t pulls = 0;
  double mean_duration = 0.0; // seconds
  double m2 = 0.0;            // sum of squared deviations, seconds^2
  std::uint64_t last_updated = 0;

  /// Sample variance; only meaningful when pulls >= 2.
  [[nodiscard]] std::optional<double> variance() const;
  [[nodiscard]] std::optional<double> stddev() const;

  friend bool operator==(const ArmStats&, const ArmStats&) = default;
};

enum class Algorithm { greedy, epsilon_greedy, ucb1, bayes_ucb };

[[nodiscard]] std::string_view to_string(Algorithm algorithm);
/// Throws std::invalid_argument for unknown names.
[[nodiscard]] Algorithm parse_algorithm(std::string_view name);

/// Fewest pulls an arm needs before the algorithm's weight is defined.
[[nodiscard]] std::uint64_t minimum_pulls(Algorithm algorithm);

/// Arms of one function keyed by environment id.
struct ArmTable {
  std::map<std::string, ArmStats> arms;

  [[nodiscard]] std::uint64_t total_pulls() const;
  [[nodiscard]] const ArmStats& at(const std::string& environment) const;
};

/// Function name -> arms of that function. Each function is an independent
/// bandit instance.
using BanditTable = std::map<std::string, ArmTable>;

struct WeightParams {
  double epsilon = 0.1;
  double c = 2.0;
  // Seconds represented by one unit of UCB1 bonus. 1.0 evaluates the bonus
  // directly in seconds.
  double exploration_unit = 1.0;
};

/// Weight per environment. An empty optional marks an arm still in cold start.
struct WeightReport {
  std::string function;
  Algorithm algorithm = Algorithm::ucb1;
  std::map<std::string, std::optional<double>> weights;

  [[nodiscard]] bool all_warm() const;
  /// Least weight among warm arms, ties broken by lexicographic id.
  [[nodiscard]] std::optional<std::string> argmin() const;
};

/// Folds one observation into the moments (Welford). Throws
/// std::invalid_argument for negative or non-finite durations.
[[nodiscard]] ArmStats update(ArmStats stats, double duration);

[[nodiscard]] std::optional<double> greedy_weight(const ArmStats& stats);

/// sqrt(-ln p / (2 pulls)). Requires 0 < p < 1 and pulls >= 1.
[[nodiscard]] double hoeffding_bound(double p, std::uint64_t pulls);

/// sqrt(2 ln t / pulls), the Hoeffding bound with p = t^-4.
[[nodiscard]] double ucb1_bonus(std::uint64_t total_pulls, std::uint64_t pulls);

[[nodiscard]] std::optional<double> ucb1_weight(const ArmStats& stats,
                                                std::uint64_t total_pulls,
                                                double exploration_unit = 1.0);

/// mean - c * sigma / sqrt(pulls) under a Gaussian duration model.
[[nodiscard]] std::optional<double> bayes_ucb_weight(const ArmStats& stats, double c);

/// Uniform choice with probability epsilon, argmin otherwise. Cold-start
/// entries are only reachable through the uniform branch. Throws
/// std::invalid_argument on an empty report or epsilon outside [0, 1].
[[nodiscard]] std::string epsilon_greedy_select(const WeightReport& report, double epsilon,
                                                std::mt19937_64& rng);

/// Least-pulled environment still below the algorithm's minimum, ties broken
/// lexicographically. Environments absent from the table count as unpulled.
[[nodiscard]] std::optional<std::string>
cold_start_order(const ArmTable& table, std::span<const std::string> environments,
                 Algorithm algorithm);

/// Weights for every listed environment. For epsilon_greedy the reported
/// weights are the greedy means; the random branch lives in selection.
[[nodiscard]] WeightReport compute_weights(const std::string& function, const ArmTable& table,
                                           std::span<const std::string> environments,
                                           Algorithm algorithm, const WeightParams& params);

} // namespace fogroute::bandit
