// Batch runner for the routing experiments.
//
//   experiment run --scenario exp3 --iterations 99 --seed 42 --scale 0.1 --out results/
//   experiment summarize --in results/
//
// Without --proxy the run starts its own simulator and proxy on loopback.

#include <fogroute/experiment.hpp>
#include <fogroute/testbed.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fogroute;

namespace {

struct RunArgs {
  std::string scenario = "exp1";
  std::optional<std::uint64_t> iterations;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::uint64_t> warmup;
  std::optional<double> remote_timeout;
  std::string algorithm;
  bool jitter = false;
  bool no_jitter = false;
  fs::path out = "results";
  std::string config_path;
  std::string log_path;
  std::string proxy_url;
  std::string admin_url;
  bool quiet = false;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

void print_report(const experiment::Report& report) {
  fmt::print("scenario {} ({} interleaving)\n", report.scenario, report.interleaving);
  for (const auto& fn : report.functions) {
    fmt::print("{}: {} requests, {} failures, {} fallbacks\n", fn.function, fn.requests,
               fn.failures, fn.fallbacks);
    for (const auto& [env, share] : fn.serving_frequency) {
      fmt::print("  served by {:<16} {:6.1f}%\n", env, 100.0 * share);
    }
    for (const auto& phase : fn.phases) {
      fmt::print("  iterations {:>3}-{:<3} mean {:.4f} s\n", phase.first, phase.last,
                 phase.mean);
    }
    if (fn.crossover) {
      fmt::print("  crossover at iteration {}\n", *fn.crossover);
    }
  }
}

int run_command(const RunArgs& args) {
  const auto config = args.config_path.empty() ? default_config() : load_config(args.config_path);

  experiment::PlanOverrides overrides;
  overrides.iterations = args.iterations;
  overrides.seed = args.seed;
  overrides.scale = args.scale;
  overrides.warmup = args.warmup;
  overrides.remote_timeout = args.remote_timeout;
  if (!args.algorithm.empty()) {
    overrides.algorithm = bandit::parse_algorithm(args.algorithm);
  }
  if (args.jitter || args.no_jitter) {
    overrides.jitter = args.jitter;
  }
  const auto plan =
      experiment::make_plan(experiment::parse_scenario(args.scenario), config, overrides);

  fs::create_directories(args.out);
  write_text(args.out / experiment::plan_file, to_json(plan).dump(2) + "\n");

  experiment::ProgressCallback progress;
  if (!args.quiet) {
    progress = [](const experiment::IterationResult& r) {
      spdlog::info("#{} {} -> {} ({}) {:.3f}s {}", r.iteration, r.function, r.chosen,
                   r.serving.empty() ? "-" : r.serving, r.total_time, r.outcome);
    };
  }

  std::optional<fs::path> log;
  if (!args.log_path.empty()) {
    log = args.log_path;
  }

  experiment::RunOutcome outcome;
  if (args.proxy_url.empty()) {
    outcome = run_in_testbed(plan, config, log, progress);
  } else {
    if (!plan.fault_schedule.empty() && args.admin_url.empty()) {
      throw std::invalid_argument(args.scenario + " injects faults; pass --sim-admin");
    }
    experiment::HttpProxyEndpoint proxy(args.proxy_url);
    experiment::HttpFaultController faults(args.admin_url);
    outcome = experiment::run(plan, proxy, faults, progress);
  }

  if (outcome.results.empty()) {
    experiment::Report empty;
    empty.scenario = to_string(plan.scenario);
    experiment::emit({}, empty, args.out);
  } else {
    const auto report = experiment::summarize(outcome.results, plan.fault_iterations(),
                                              std::string(to_string(plan.scenario)),
                                              config.local_environment().id);
    experiment::emit(outcome.results, report, args.out);
    print_report(report);
  }
  if (outcome.aborted) {
    spdlog::error("run aborted after {} results: {}", outcome.results.size(), outcome.error);
    return 2;
  }
  return 0;
}

int summarize_command(const fs::path& in, const std::string& local) {
  const auto results = experiment::read_iterations(in);
  if (results.empty()) {
    throw std::invalid_argument(in.string() + " holds no iterations");
  }
  std::vector<std::uint64_t> faults;
  std::string scenario;
  if (const auto plan_path = in / experiment::plan_file; fs::exists(plan_path)) {
    std::ifstream plan_in(plan_path);
    const auto plan = experiment::plan_from_json(nlohmann::json::parse(plan_in));
    faults = plan.fault_iterations();
    scenario = to_string(plan.scenario);
  }
  const auto report = experiment::summarize(results, faults, scenario, local);
  experiment::emit(results, report, in);
  print_report(report);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"fogroute experiment runner"};
  app.require_subcommand(1);

  RunArgs args;
  auto* run = app.add_subcommand("run", "execute a scenario and write CSV results");
  run->add_option("--scenario", args.scenario, "exp1 | exp2 | exp3 | exp4")
      ->check(CLI::IsMember({"exp1", "exp2", "exp3", "exp4"}));
  run->add_option("--iterations", args.iterations);
  run->add_option("--seed", args.seed);
  run->add_option("--scale", args.scale)->check(CLI::PositiveNumber);
  run->add_option("--warmup", args.warmup, "unreported iterations run first");
  run->add_option("--remote-timeout", args.remote_timeout,
                  "per-attempt cloud timeout in seconds at scale 1");
  run->add_option("--algorithm", args.algorithm, "greedy | epsilon_greedy | ucb1 | bayes_ucb");
  run->add_flag("--jitter", args.jitter);
  run->add_flag("--no-jitter", args.no_jitter);
  run->add_option("--out", args.out, "output directory");
  run->add_option("-c,--config", args.config_path);
  run->add_option("--log", args.log_path, "execution log kept across runs");
  run->add_option("--proxy", args.proxy_url, "use a running proxy, e.g. http://127.0.0.1:8080");
  run->add_option("--sim-admin", args.admin_url, "admin URL of the running simulator");
  run->add_flag("-q,--quiet", args.quiet);

  fs::path in = "results";
  std::string local = "local";
  auto* summarize = app.add_subcommand("summarize", "recompute the report from iterations.csv");
  summarize->add_option("--in", in)->required();
  summarize->add_option("--local", local, "id of the local environment");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      return run_command(args);
    }
    return summarize_command(in, local);
  } catch (const std::exception& error) {
    spdlog::error("{}", error.what());
    return 1;
  }
}
