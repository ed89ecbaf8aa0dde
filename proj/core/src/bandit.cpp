#include "fogroute/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fogroute::bandit {

std::optional<double> ArmStats::variance() const {
  if (pulls < 2) {
    return std::nullopt;
  }
  return m2 / static_cast<double>(pulls - 1);
}

std::optional<double> ArmStats::stddev() const {
  const auto var = variance();
  if (!var) {
    return std::nullopt;
  }
  return std::sqrt(*var);
}

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
  case Algorithm::greedy:
    return "greedy";
  case Algorithm::epsilon_greedy:
    return "epsilon_greedy";
  case Algorithm::ucb1:
    return "ucb1";
  case Algorithm::bayes_ucb:
    return "bayes_ucb";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto algorithm : {Algorithm::greedy, Algorithm::epsilon_greedy, Algorithm::ucb1,
                         Algorithm::bayes_ucb}) {
    if (name == to_string(algorithm)) {
      return algorithm;
    }
  }
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

std::uint64_t minimum_pulls(Algorithm algorithm) {
  return algorithm == Algorithm::bayes_ucb ? 2 : 1;
}

std::uint64_t ArmTable::total_pulls() const {
  std::uint64_t total = 0;
  for (const auto& [id, stats] : arms) {
    total += stats.pulls;
  }
  return total;
}

const ArmStats& ArmTable::at(const std::string& environment) const {
  static const ArmStats empty{};
  const auto it = arms.find(environment);
  return it == arms.end() ? empty : it->second;
}

bool WeightReport::all_warm() const {
  return std::all_of(weights.begin(), weights.end(),
                     [](const auto& entry) { return entry.second.has_value(); });
}

std::optional<std::string> WeightReport::argmin() const {
  std::optional<std::string> best;
  double best_weight = 0.0;
  // std::map iterates ids in lexicographic order, so strict < keeps the
  // first id among equal weights.
  for (const auto& [id, weight] : weights) {
    if (weight && (!best || *weight < best_weight)) {
      best = id;
      best_weight = *weight;
    }
  }
  return best;
}

ArmStats update(ArmStats stats, double duration) {
  if (!std::isfinite(duration) || duration < 0.0) {
    throw std::invalid_argument("duration must be finite and non-negative");
  }
  stats.pulls += 1;
  const double delta = duration - stats.mean_duration;
  stats.mean_duration += delta / static_cast<double>(stats.pulls);
  stats.m2 += delta * (duration - stats.mean_duration);
  if (stats.m2 < 0.0) {
    stats.m2 = 0.0;
  }
  return stats;
}

std::optional<double> greedy_weight(const ArmStats& stats) {
  if (stats.pulls == 0) {
    return std::nullopt;
  }
  return stats.mean_duration;
}

double hoeffding_bound(double p, std::uint64_t pulls) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("hoeffding_bound: p must lie in (0, 1)");
  }
  if (pulls == 0) {
    throw std::invalid_argument("hoeffding_bound: pulls must be positive");
  }
  return std::sqrt(-std::log(p) / (2.0 * static_cast<double>(pulls)));
}

double ucb1_bonus(std::uint64_t total_pulls, std::uint64_t pulls) {
  if (total_pulls == 0 || pulls == 0) {
    throw std::invalid_argument("ucb1_bonus: counts must be positive");
  }
  return std::sqrt(2.0 * std::log(static_cast<double>(total_pulls)) /
                   static_cast<double>(pulls));
}

std::optional<double> ucb1_weight(const ArmStats& stats, std::uint64_t total_pulls,
                                  double exploration_unit) {
  if (stats.pulls == 0) {
    return std::nullopt;
  }
  if (total_pulls < stats.pulls) {
    throw std::invalid_argument("ucb1_weight: total pulls below arm pulls");
  }
  return stats.mean_duration - exploration_unit * ucb1_bonus(total_pulls, stats.pulls);
}

std::optional<double> bayes_ucb_weight(const ArmStats& stats, double c) {
  if (!(c > 0.0)) {
    throw std::invalid_argument("bayes_ucb_weight: c must be positive");
  }
  const auto sigma = stats.stddev();
  if (!sigma) {
    return std::nullopt;
  }
  return stats.mean_duration - c * *sigma / std::sqrt(static_cast<double>(stats.pulls));
}

namespace {

// Explicit conversions keep draws identical across standard libraries.
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t index_draw(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

} // namespace

std::string epsilon_greedy_select(const WeightReport& report, double epsilon,
                                  std::mt19937_64& rng) {
  if (report.weights.empty()) {
    throw std::invalid_argument("epsilon_greedy_select: empty weight report");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon_greedy_select: epsilon must lie in [0, 1]");
  }
  const bool explore = unit_draw(rng) < epsilon;
  const auto best = report.argmin();
  if (explore || !best) {
    auto it = report.weights.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(index_draw(rng, report.weights.size())));
    return it->first;
  }
  return *best;
}

std::optional<std::string> cold_start_order(const ArmTable& table,
                                            std::span<const std::string> environments,
                                            Algorithm algorithm) {
  const auto minimum = minimum_pulls(algorithm);
  std::optional<std::string> chosen;
  std::uint64_t chosen_pulls = 0;
  for (const auto& id : environments) {
    const auto pulls = table.at(id).pulls;
    if (pulls >= minimum) {
      continue;
    }
    if (!chosen || pulls < chosen_pulls || (pulls == chosen_pulls && id < *chosen)) {
      chosen = id;
      chosen_pulls = pulls;
    }
  }
  return chosen;
}

WeightReport compute_weights(const std::string& function, const ArmTable& table,
                             std::span<const std::string> environments, Algorithm algorithm,
                             const WeightParams& params) {
  WeightReport report{function, algorithm, {}};
  const auto total = table.total_pulls();
  for (const auto& id : environments) {
    const auto& stats = table.at(id);
    std::optional<double> weight;
    switch (algorithm) {
    case Algorithm::greedy:
    case Algorithm::epsilon_greedy:
      weight = greedy_weight(stats);
      break;
    case Algorithm::ucb1:
      weight = ucb1_weight(stats, total, params.exploration_unit);
      break;
    case Algorithm::bayes_ucb:
      weight = bayes_ucb_weight(stats, params.c);
      break;
    }
    report.weights.emplace(id, weight);
  }
  return report;
}

} // namespace fogroute::bandit
