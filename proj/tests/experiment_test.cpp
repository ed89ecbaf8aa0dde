#include "test_support.hpp"

#include <fogroute/experiment.hpp>

#include <gtest/gtest.h>

#include <fstream>

namespace fogroute::experiment {
namespace {

using fogroute::testing::TempDir;

IterationResult row(std::uint64_t i, const std::string& serving, double t = 1.0) {
  return {i, "func_heavy", serving, serving, t, false, true, "success"};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(CumulativeAverage, ConstantSeries) {
  const auto avg = cumulative_average(std::vector<double>(30, 2.0));
  ASSERT_EQ(avg.size(), 30u);
  for (double v : avg) {
    EXPECT_DOUBLE_EQ(v, 2.0);
  }
}

TEST(CumulativeAverage, RunningMean) {
  const auto avg = cumulative_average({1.0, 3.0, 5.0, 7.0});
  EXPECT_EQ(avg, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
}

// Brute-force restatement of the crossover rule.
std::optional<std::uint64_t> oracle_crossover(const std::vector<IterationResult>& rows,
                                              std::uint64_t fault, std::size_t window) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].iteration < fault) {
      continue;
    }
    std::size_t local = 0;
    std::size_t seen = 0;
    for (std::size_t j = i + 1; j-- > 0 && seen < window;) {
      ++seen;
      local += rows[j].serving == "local" ? 1 : 0;
    }
    if (local * 2 > seen) {
      return rows[i].iteration;
    }
  }
  return std::nullopt;
}

TEST(Crossover, SyntheticStep) {
  for (std::uint64_t last_remote : {50u, 73u, 120u}) {
    std::vector<IterationResult> rows;
    for (std::uint64_t i = 1; i <= 249; ++i) {
      rows.push_back(row(i, i <= last_remote ? "frankfurtServer" : "local"));
    }
    const auto found = detect_crossover(rows, 51, "local");
    // Eleven local rows are the first strict majority of twenty.
    EXPECT_EQ(found, last_remote + 11);
    EXPECT_EQ(found, oracle_crossover(rows, 51, 20));
  }
}

TEST(Crossover, NeverSwitching) {
  std::vector<IterationResult> rows;
  for (std::uint64_t i = 1; i <= 99; ++i) {
    rows.push_back(row(i, "frankfurtServer"));
  }
  EXPECT_FALSE(detect_crossover(rows, 51, "local").has_value());
}

TEST(Crossover, RandomTracesAgreeWithOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<IterationResult> rows;
    const double p = static_cast<double>(rng() % 100) / 100.0;
    std::bernoulli_distribution local(p);
    for (std::uint64_t i = 1; i <= 120; ++i) {
      rows.push_back(row(i, local(rng) ? "local" : "londonServer"));
    }
    EXPECT_EQ(detect_crossover(rows, 51, "local"), oracle_crossover(rows, 51, 20));
  }
}

TEST(RemoteFraction, CountsSuccessfulRemoteServes) {
  std::vector<IterationResult> rows{row(1, "local"), row(2, "londonServer"),
                                    row(3, "frankfurtServer"), row(4, "local")};
  rows[2].ok = false;
  EXPECT_DOUBLE_EQ(remote_fraction(rows, 1, 4, "local"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(remote_fraction(rows, 10, 20, "local"), 0.0);
}

TEST(Summarize, PhasesAndFrequencies) {
  std::vector<IterationResult> rows;
  for (std::uint64_t i = 1; i <= 99; ++i) {
    rows.push_back(row(i, i <= 50 ? "frankfurtServer" : "local", i <= 50 ? 1.0 : 4.0));
  }
  const auto report = summarize(rows, {51}, "exp3");
  const auto& fn = report.function("func_heavy");
  EXPECT_EQ(fn.requests, 99u);
  ASSERT_EQ(fn.phases.size(), 2u);
  EXPECT_DOUBLE_EQ(fn.phases[0].mean, 1.0);
  EXPECT_EQ(fn.phases[0].last, 50u);
  EXPECT_DOUBLE_EQ(fn.phases[1].mean, 4.0);
  EXPECT_NEAR(fn.serving_frequency.at("local"), 49.0 / 99.0, 1e-12);
  EXPECT_EQ(fn.crossover, 61u);
  EXPECT_THROW((void)summarize({}, {}), std::invalid_argument);
}

TEST(Emit, HeaderOnlyForEmptyResults) {
  TempDir dir;
  emit({}, Report{}, dir.path());
  EXPECT_EQ(slurp(dir / iterations_file),
            "iteration,function,chosen,serving,total_time_s,fallback,ok,outcome\n");
}

TEST(Emit, RowCountAndByteStability) {
  std::vector<IterationResult> rows;
  for (std::uint64_t i = 1; i <= 99; ++i) {
    auto r = row(i, i % 3 == 0 ? "local" : "frankfurtServer", 0.1 * static_cast<double>(i));
    if (i % 7 == 0) {
      r.chosen = "londonServer";
      r.fallback = true;
      r.outcome = "remote_failure_then_fallback";
    }
    rows.push_back(r);
  }
  const auto report = summarize(rows, {51}, "exp3");
  TempDir a;
  TempDir b;
  emit(rows, report, a.path());
  emit(rows, report, b.path());
  emit(rows, report, b.path());
  for (const auto* name : {iterations_file, cumulative_file, summary_file}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto text = slurp(a / iterations_file);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 100);
  const auto parsed = parse_iterations_csv(text);
  ASSERT_EQ(parsed.size(), rows.size());
  EXPECT_EQ(parsed[6].chosen, "londonServer");
  EXPECT_TRUE(parsed[6].fallback);
  EXPECT_NEAR(parsed[98].total_time, 9.9, 1e-6);
}

TEST(Emit, UnwritableDirectoryIsAnError) {
  TempDir dir;
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit({}, Report{}, dir / "file"), std::exception);
}

TEST(Plan, Defaults) {
  const auto config = default_config();
  const auto exp1 = make_plan(Scenario::exp1, config);
  EXPECT_EQ(exp1.iterations, 99u);
  EXPECT_EQ(exp1.functions.size(), 4u);
  EXPECT_DOUBLE_EQ(exp1.scale, 0.1);
  EXPECT_TRUE(exp1.fault_schedule.empty());

  const auto exp3 = make_plan(Scenario::exp3, config);
  EXPECT_EQ(exp3.fault_iterations(), (std::vector<std::uint64_t>{51}));
  EXPECT_EQ(exp3.fault_schedule.size(), 2u);

  const auto exp4 = make_plan(Scenario::exp4, config);
  EXPECT_EQ(exp4.iterations, 249u);
  EXPECT_EQ(exp4.fault_schedule.front().fault, sim::Fault::bandwidth_penalty);

  PlanOverrides overrides;
  overrides.iterations = 10;
  EXPECT_THROW((void)make_plan(Scenario::exp3, config, overrides), std::invalid_argument);
}

TEST(Plan, JsonRoundTrip) {
  const auto plan = make_plan(Scenario::exp2, default_config());
  const auto back = plan_from_json(nlohmann::json::parse(to_json(plan).dump()));
  EXPECT_EQ(to_json(back), to_json(plan));
}

class ScriptedProxy final : public ProxyEndpoint {
public:
  std::size_t fail_after = SIZE_MAX;
  std::vector<std::string> calls;

  InvokeReply invoke(const std::string& function, bandit::Algorithm) override {
    if (calls.size() >= fail_after) {
      throw ProxyUnreachable("proxy went away");
    }
    calls.push_back(function);
    return {200, {{"swarm", "local"}}, "local", "local", "success", 0.01};
  }
};

class RecordingFaults final : public FaultController {
public:
  std::vector<std::pair<std::size_t, std::uint64_t>> applied; // (calls so far, iteration)
  const ScriptedProxy* proxy = nullptr;
  void inject(const FaultAction& action) override {
    applied.emplace_back(proxy->calls.size(), action.iteration);
  }
};

TEST(Run, AppliesFaultsBeforeTheirIteration) {
  const auto plan = make_plan(Scenario::exp3, default_config());
  ScriptedProxy proxy;
  RecordingFaults faults;
  faults.proxy = &proxy;
  const auto outcome = run(plan, proxy, faults);
  EXPECT_FALSE(outcome.aborted);
  EXPECT_EQ(outcome.results.size(), 99u);
  ASSERT_EQ(faults.applied.size(), 2u);
  EXPECT_EQ(faults.applied[0], (std::pair<std::size_t, std::uint64_t>{50, 51}));
}

TEST(Run, RoundRobinAcrossFunctions) {
  const auto plan = make_plan(Scenario::exp1, default_config());
  ScriptedProxy proxy;
  RecordingFaults faults;
  faults.proxy = &proxy;
  const auto outcome = run(plan, proxy, faults);
  ASSERT_EQ(outcome.results.size(), 99u * 4u);
  EXPECT_EQ(proxy.calls[0], "func_light");
  EXPECT_EQ(proxy.calls[1], "func_heavy");
  EXPECT_EQ(outcome.results[4].iteration, 2u);
}

TEST(Run, ProxyOutageKeepsPartialResults) {
  const auto plan = make_plan(Scenario::exp3, default_config());
  ScriptedProxy proxy;
  proxy.fail_after = 30;
  RecordingFaults faults;
  faults.proxy = &proxy;
  const auto outcome = run(plan, proxy, faults);
  EXPECT_TRUE(outcome.aborted);
  EXPECT_EQ(outcome.results.size(), 30u);
  EXPECT_FALSE(outcome.error.empty());
}

} // namespace
} // namespace fogroute::experiment
