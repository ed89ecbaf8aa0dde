#include <fogroute/bandit.hpp>
#include <fogroute/metrics_store.hpp>
#include <fogroute/proxy.hpp>

#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

namespace {

using namespace fogroute;

bandit::ArmTable warm_table(std::size_t environments, std::uint64_t pulls) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> duration(0.1, 2.0);
  bandit::ArmTable table;
  for (std::size_t e = 0; e < environments; ++e) {
    auto& arm = table.arms["env" + std::to_string(e)];
    for (std::uint64_t i = 0; i < pulls; ++i) {
      arm = bandit::update(arm, duration(rng));
    }
  }
  return table;
}

std::vector<std::string> names(const bandit::ArmTable& table) {
  std::vector<std::string> out;
  for (const auto& [id, arm] : table.arms) {
    out.push_back(id);
  }
  return out;
}

void BM_Update(benchmark::State& state) {
  bandit::ArmStats stats;
  double x = 0.5;
  for (auto _ : state) {
    stats = bandit::update(stats, x);
    x = x < 2.0 ? x + 0.001 : 0.5;
    benchmark::DoNotOptimize(stats);
  }
}
BENCHMARK(BM_Update);

void BM_ComputeWeights(benchmark::State& state) {
  const auto table = warm_table(static_cast<std::size_t>(state.range(0)), 50);
  const auto envs = names(table);
  const auto algorithm = static_cast<bandit::Algorithm>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bandit::compute_weights("f", table, envs, algorithm, {}));
  }
}
BENCHMARK(BM_ComputeWeights)
    ->ArgsProduct({{3, 16, 64},
                   {static_cast<int>(bandit::Algorithm::greedy),
                    static_cast<int>(bandit::Algorithm::ucb1),
                    static_cast<int>(bandit::Algorithm::bayes_ucb)}});

void BM_SelectEnvironment(benchmark::State& state) {
  const auto config = default_config();
  const auto& fn = *config.find_function("func_heavy");
  bandit::ArmTable table;
  for (const auto& id : config.environment_ids()) {
    for (double d : {1.0, 1.1, 0.9}) {
      table.arms[id] = bandit::update(table.arms[id], d);
    }
  }
  std::mt19937_64 rng(3);
  proxy::InvocationOptions options;
  options.algorithm = bandit::Algorithm::epsilon_greedy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(proxy::select_environment(config, fn, options, table, rng));
  }
}
BENCHMARK(BM_SelectEnvironment);

void BM_StoreInsert(benchmark::State& state) {
  const bool persistent = state.range(0) != 0;
  const auto path = std::filesystem::temp_directory_path() / "fogroute-bench.ndjson";
  std::filesystem::remove(path);
  {
    metrics::MetricsStore store({"local", "cloud"},
                                persistent ? std::optional(path) : std::nullopt);
    const metrics::ExecutionRecord record{"func_heavy", "local", 0.25, "2026-01-01T00:00:00.000Z",
                                          metrics::Outcome::success};
    for (auto _ : state) {
      store.insert_duration(record);
    }
  }
  std::filesystem::remove(path);
}
BENCHMARK(BM_StoreInsert)->Arg(0)->Arg(1);

void BM_LoadSnapshot(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "fogroute-replay.ndjson";
  std::filesystem::remove(path);
  {
    metrics::MetricsStore store({"local", "cloud"}, path);
    for (std::int64_t i = 0; i < state.range(0); ++i) {
      store.insert_duration({"func_heavy", i % 2 ? "local" : "cloud", 0.001 * static_cast<double>(i % 97),
                             "2026-01-01T00:00:00.000Z", metrics::Outcome::success});
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::load_snapshot(path));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  std::filesystem::remove(path);
}
BENCHMARK(BM_LoadSnapshot)->Arg(1000)->Arg(100000);

} // namespace

BENCHMARK_MAIN();
