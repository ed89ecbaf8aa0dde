// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// The scenario runs are mostly sleeping on simulated service times, so the
// seeded sweeps run side by side on separate in-process testbeds.

#include "test_support.hpp"
#include "wire_format.hpp"

#include <fogroute/bandit.hpp>
#include <fogroute/experiment.hpp>
#include <fogroute/testbed.hpp>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

using namespace fogroute;
using experiment::IterationResult;
using experiment::Scenario;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  int number = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

std::vector<Verdict> verdicts;

void record(int number, std::string title, bool pass, std::string detail) {
  fmt::print("[{}] criterion {}: {} ({})\n", pass ? "PASS" : "FAIL", number, title, detail);
  std::fflush(stdout);
  verdicts.push_back({number, std::move(title), pass, std::move(detail)});
}

// Runs the body, turning an escaped exception into a failing verdict.
template <typename Fn>
void criterion(int number, const std::string& title, Fn&& body) {
  try {
    body();
  } catch (const std::exception& error) {
    record(number, title, false, std::string("exception: ") + error.what());
  }
}

double share(const std::vector<IterationResult>& rows, std::uint64_t first, std::uint64_t last,
             const std::function<bool(const IterationResult&)>& predicate) {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (const auto& r : rows) {
    if (r.iteration >= first && r.iteration <= last) {
      ++total;
      hits += predicate(r) ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

double mean_time(const std::vector<IterationResult>& rows, std::uint64_t first,
                 std::uint64_t last) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.iteration >= first && r.iteration <= last) {
      sum += r.total_time;
      ++n;
    }
  }
  return n == 0 ? NAN : sum / static_cast<double>(n);
}

experiment::RunOutcome run_plan(const experiment::ExperimentPlan& plan) {
  auto outcome = run_in_testbed(plan, default_config());
  if (outcome.aborted) {
    throw std::runtime_error("run aborted: " + outcome.error);
  }
  return outcome;
}

experiment::ExperimentPlan plan_for(Scenario scenario, std::uint64_t seed,
                                    experiment::PlanOverrides overrides = {}) {
  overrides.seed = seed;
  return experiment::make_plan(scenario, default_config(), overrides);
}

std::optional<std::string> argmin_of(const nlohmann::json& weight_scale) {
  std::optional<std::string> best;
  double best_weight = INFINITY;
  for (const auto& [key, value] : weight_scale.items()) {
    if (value.is_number() && (value.get<double>() < best_weight ||
                              (value.get<double>() == best_weight && key < *best))) {
      best = key;
      best_weight = value.get<double>();
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// 1: bandit math against a brute-force recomputation

void criterion_1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> length(1, 200);
  std::uniform_real_distribution<double> duration(0.0, 10.0);
  double worst = 0.0;
  double worst_bonus = 0.0;
  constexpr double c = 2.0;
  for (int h = 0; h < 1000; ++h) {
    std::vector<double> xs(static_cast<std::size_t>(length(rng)));
    bandit::ArmStats stats;
    for (auto& x : xs) {
      x = duration(rng);
      stats = bandit::update(stats, x);
    }
    const auto n = static_cast<long double>(xs.size());
    long double sum = 0.0L;
    for (double x : xs) {
      sum += x;
    }
    const long double mean = sum / n;
    long double squares = 0.0L;
    for (double x : xs) {
      squares += (x - mean) * (x - mean);
    }
    const auto t = xs.size() + std::uniform_int_distribution<std::size_t>(0, 500)(rng);
    const long double bonus =
        std::sqrt(2.0L * std::log(static_cast<long double>(t)) / n);

    worst = std::max(worst, std::fabs(*bandit::greedy_weight(stats) - static_cast<double>(mean)));
    for (double unit : {1.0, 0.001}) {
      worst = std::max(worst, std::fabs(*bandit::ucb1_weight(stats, t, unit) -
                                        static_cast<double>(mean - unit * bonus)));
    }
    if (xs.size() >= 2) {
      const long double sigma = std::sqrt(squares / (n - 1));
      worst = std::max(worst, std::fabs(*bandit::bayes_ucb_weight(stats, c) -
                                        static_cast<double>(mean - c * sigma / std::sqrt(n))));
    }
    const double p = std::pow(static_cast<double>(t), -4.0);
    worst_bonus = std::max(worst_bonus, std::fabs(bandit::ucb1_bonus(t, xs.size()) -
                                                  bandit::hoeffding_bound(p, xs.size())));
  }
  const double elapsed = seconds_since(start);
  record(1, "bandit math oracle equivalence",
         worst <= 1e-6 && worst_bonus <= 1e-12 && elapsed < 10.0,
         fmt::format("max weight error {:.2e}, max bonus error {:.2e}, {:.2f} s", worst,
                     worst_bonus, elapsed));
}

// ---------------------------------------------------------------------------
// 2, 3, 5: seed-swept Exp. 1

constexpr int exp1_seeds = 20;

void criteria_2_3_5(const std::vector<std::vector<IterationResult>>& runs, double elapsed) {
  criterion(2, "forward to the nearest cloud", [&] {
    double worst = 1.0;
    std::string worst_where;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      for (const auto* fn : {"func_heavy", "func_super_heavy"}) {
        const double f =
            share(experiment::for_function(runs[s], fn), 50, 99,
                  [](const IterationResult& r) { return r.serving == "frankfurtServer"; });
        if (f < worst) {
          worst = f;
          worst_where = fmt::format("{} seed {}", fn, s + 1);
        }
      }
    }
    record(2, "forward to the nearest cloud", worst >= 0.6 && elapsed < 120.0,
           fmt::format("{} seeds, lowest frankfurtServer share over iterations 50-99 {:.2f} "
                       "({}), sweep took {:.1f} s",
                       runs.size(), worst, worst_where, elapsed));
  });

  criterion(3, "forward to local", [&] {
    double worst = 1.0;
    for (const auto& run : runs) {
      worst = std::min(worst, share(experiment::for_function(run, "func_light"), 20, 99,
                                    [](const IterationResult& r) { return r.serving == "local"; }));
    }
    record(3, "forward to local", worst >= 0.9,
           fmt::format("lowest local share of func_light over iterations 20-99 across {} seeds "
                       "{:.3f}",
                       runs.size(), worst));
  });

  criterion(5, "pinned cloud-only bypass", [&] {
    std::size_t worst = 99;
    for (const auto& run : runs) {
      const auto rows = experiment::for_function(run, "func_obese_heavy");
      worst = std::min<std::size_t>(
          worst, static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) {
            return r.ok && r.serving == "londonServer";
          })));
    }
    TestbedOptions options;
    options.scale = 0.1;
    Testbed bed(options);
    bed.simulator().inject("londonServer", sim::Fault::reachable, false,
                           sim::UnreachableMode::refuse);
    experiment::HttpProxyEndpoint proxy(bed.proxy_url());
    const auto reply = proxy.invoke("func_obese_heavy", bandit::Algorithm::ucb1);
    const bool errored = reply.status == 502 && reply.serving.empty();
    record(5, "pinned cloud-only bypass", worst == 99 && errored,
           fmt::format("fewest londonServer serves {}/99; with londonServer down: HTTP {}, "
                       "served by '{}'",
                       worst, reply.status, reply.serving));
  });
}

// ---------------------------------------------------------------------------
// 4: fallback with both clouds unreachable

struct FallbackRun {
  std::optional<std::string> argmin;
  std::vector<IterationResult> rows;
};

FallbackRun exp2_run(std::uint64_t seed) {
  const auto plan = plan_for(Scenario::exp2, seed);
  auto warm = plan;
  warm.fault_schedule.clear();
  warm.iterations = plan.warmup_iterations;
  warm.warmup_iterations = 0;
  auto main = plan;
  main.warmup_iterations = 0;

  Testbed bed(testbed_options(plan, default_config(), std::nullopt));
  experiment::HttpProxyEndpoint proxy(bed.proxy_url());
  experiment::HttpFaultController faults(bed.admin_url());
  if (experiment::run(warm, proxy, faults).aborted) {
    throw std::runtime_error("warm-up aborted");
  }
  FallbackRun out;
  out.argmin = argmin_of(proxy.weight_scale(plan.functions.front(), plan.algorithm));
  const auto outcome = experiment::run(main, proxy, faults);
  if (outcome.aborted) {
    throw std::runtime_error("exp2 aborted: " + outcome.error);
  }
  out.rows = outcome.results;
  return out;
}

void criterion_4(const std::vector<FallbackRun>& runs) {
  std::size_t total = 0;
  std::size_t good = 0;
  bool cloud_argmin = true;
  std::string argmins;
  for (const auto& run : runs) {
    cloud_argmin = cloud_argmin && run.argmin && *run.argmin != "local";
    argmins += (argmins.empty() ? "" : ",") + run.argmin.value_or("none");
    for (const auto& r : run.rows) {
      ++total;
      good += r.ok && r.serving == "local" && r.outcome == "remote_failure_then_fallback";
    }
  }
  record(4, "fallback to local", cloud_argmin && total > 0 && good == total,
         fmt::format("argmin before the cut [{}], {}/{} requests served by local via fallback",
                     argmins, good, total));
}

// ---------------------------------------------------------------------------
// 6: Exp. 3 ordering at scale 0.1 and bracket at scale 1.0

void criterion_6(const std::vector<std::vector<IterationResult>>& seeded,
                 const std::vector<IterationResult>& full_scale) {
  bool ordered = true;
  bool all_ok = true;
  for (const auto& rows : seeded) {
    ordered = ordered && mean_time(rows, 51, 99) > mean_time(rows, 1, 50);
    all_ok = all_ok && std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
  }
  const double pre = mean_time(full_scale, 1, 50);
  const double post = mean_time(full_scale, 51, 99);
  const bool full_ok =
      std::all_of(full_scale.begin(), full_scale.end(), [](const auto& r) { return r.ok; });
  const bool bracket = pre >= 1.05 && pre <= 1.8 && post >= 4.0 && post <= 4.5;
  record(6, "Exp. 3 shape", ordered && all_ok && full_ok && bracket && post > pre,
         fmt::format("{} seeds at scale 0.1 ordered: {}, all succeeded: {}; scale 1.0 pre "
                     "{:.4f} s, post {:.4f} s",
                     seeded.size(), ordered ? "yes" : "no", all_ok && full_ok ? "yes" : "no",
                     pre, post));
}

// ---------------------------------------------------------------------------
// 7: Exp. 4 three phases

void criterion_7(const std::vector<std::vector<IterationResult>>& runs, double scale) {
  bool pass = true;
  std::string detail;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& rows = runs[s];
    const auto remote = [](const IterationResult& r) { return r.ok && r.serving != "local"; };
    const double before = share(rows, 26, 50, remote);
    const double after = share(rows, 225, 249, remote);
    const auto crossover = experiment::detect_crossover(rows, 51, "local");
    std::vector<double> totals;
    for (const auto& r : rows) {
      totals.push_back(r.total_time);
    }
    const auto cumulative = experiment::cumulative_average(totals);
    pass = pass && before >= 0.6 && after <= 0.4 && crossover && *crossover > 50 &&
           *crossover < 249;
    detail += fmt::format("{}seed {}: cloud {:.2f} before, {:.2f} final, crossover {}, "
                          "cumulative[50] {:.4f} s at scale 1",
                          detail.empty() ? "" : "; ", s + 1, before, after,
                          crossover ? std::to_string(*crossover) : "none",
                          cumulative.at(49) / scale);
  }
  record(7, "Exp. 4 shape", pass, detail);
}

// ---------------------------------------------------------------------------
// 8: wire formats against the golden files

void criterion_8() {
  TestbedOptions options;
  options.scale = 0.05;
  Testbed bed(options);
  httplib::Client client(bed.proxy_url());
  for (int i = 0; i < 6; ++i) {
    auto res = client.Post("/function/func_heavy", R"({"options":{"algorithm":"bayes_ucb"}})",
                           "application/json");
    if (!res || res->status != 200) {
      throw std::runtime_error("warm-up request failed");
    }
  }
  auto weights = client.Get("/weight_scale?function=func_heavy&algorithm=bayes_ucb");
  const auto weight_golden = fogroute::testing::load_golden("weight_scale.json");
  const bool weights_ok =
      weights && fogroute::testing::same_shape(weight_golden, nlohmann::ordered_json::parse(weights->body));

  const auto response_golden = fogroute::testing::load_golden("function_response.json");
  bool responses_ok = true;
  for (const auto& env : bed.proxy_config().environment_ids()) {
    auto res = client.Post("/function/func_heavy",
                           nlohmann::json{{"options", {{"force_target", env}}}}.dump(),
                           "application/json");
    const auto body = res ? nlohmann::ordered_json::parse(res->body) : nlohmann::ordered_json{};
    responses_ok = responses_ok && fogroute::testing::same_shape(response_golden, body) &&
                   body["swarm"] == env && body["status"] == response_golden["status"] &&
                   body["message"] == response_golden["message"];
  }
  record(8, "wire-format conformance", weights_ok && responses_ok,
         fmt::format("weight_scale keys match golden: {}; function responses match golden "
                     "keys on every environment: {}",
                     weights_ok ? "yes" : "no", responses_ok ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 9: restart between Exp. 1 and Exp. 2

double table_distance(const bandit::BanditTable& a, const bandit::BanditTable& b) {
  if (a.size() != b.size()) {
    return INFINITY;
  }
  double worst = 0.0;
  for (const auto& [fn, table] : a) {
    const auto it = b.find(fn);
    if (it == b.end() || it->second.arms.size() != table.arms.size()) {
      return INFINITY;
    }
    for (const auto& [env, arm] : table.arms) {
      const auto other = it->second.arms.find(env);
      if (other == it->second.arms.end() || other->second.pulls != arm.pulls) {
        return INFINITY;
      }
      worst = std::max({worst, std::fabs(other->second.mean_duration - arm.mean_duration),
                        std::fabs(other->second.m2 - arm.m2)});
    }
  }
  return worst;
}

struct PersistenceRun {
  double snapshot_distance = INFINITY;
  double restarted_distance = INFINITY;
  bool same_weights = false;
  bool same_choice = false;
  std::size_t exp2_fallbacks = 0;
  std::size_t exp2_total = 0;
};

PersistenceRun persistence_run() {
  fogroute::testing::TempDir dir;
  const auto log = dir / "metrics.ndjson";
  const auto exp1 = plan_for(Scenario::exp1, 7);
  Testbed bed(testbed_options(exp1, default_config(), log));
  experiment::HttpFaultController faults(bed.admin_url());
  {
    experiment::HttpProxyEndpoint proxy(bed.proxy_url());
    if (experiment::run(exp1, proxy, faults).aborted) {
      throw std::runtime_error("exp1 aborted");
    }
  }
  const auto functions = exp1.functions;
  const auto live = bed.store().bandit_table();
  std::vector<nlohmann::ordered_json> before;
  std::vector<std::string> choices_before;
  for (const auto& fn : functions) {
    before.push_back(
        proxy::weight_report_json(bed.proxy().weight_scale(fn, {}), bed.proxy_config().environment_ids()));
    choices_before.push_back(bed.proxy().select(fn, {}).candidates.front());
  }

  bed.stop_proxy();
  PersistenceRun out;
  out.snapshot_distance = table_distance(live, metrics::load_snapshot(log));
  bed.start_proxy();
  out.restarted_distance = table_distance(live, bed.store().bandit_table());

  out.same_weights = out.same_choice = true;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const auto after = proxy::weight_report_json(bed.proxy().weight_scale(functions[i], {}),
                                                 bed.proxy_config().environment_ids());
    out.same_weights = out.same_weights && after == before[i];
    out.same_choice = out.same_choice &&
                      bed.proxy().select(functions[i], {}).candidates.front() == choices_before[i];
  }

  // Exp. 2 against the restarted proxy, on the knowledge kept from Exp. 1.
  auto exp2 = plan_for(Scenario::exp2, 7);
  exp2.algorithm = bandit::Algorithm::ucb1;
  exp2.warmup_iterations = 0;
  experiment::HttpProxyEndpoint proxy(bed.proxy_url());
  const auto outcome = experiment::run(exp2, proxy, faults);
  for (const auto& r : outcome.results) {
    ++out.exp2_total;
    out.exp2_fallbacks += r.ok && r.serving == "local" && r.fallback;
  }
  return out;
}

void criterion_9(const PersistenceRun& run) {
  const bool pass = run.snapshot_distance <= 1e-9 && run.restarted_distance <= 1e-9 &&
                    run.same_weights && run.same_choice && run.exp2_total > 0 &&
                    run.exp2_fallbacks == run.exp2_total;
  record(9, "persistence across restart", pass,
         fmt::format("replayed vs live table max difference {:.1e} (snapshot) and {:.1e} "
                     "(restarted proxy), weights identical: {}, choices identical: {}, exp2 "
                     "after restart {}/{} fell back to local",
                     run.snapshot_distance, run.restarted_distance,
                     run.same_weights ? "yes" : "no", run.same_choice ? "yes" : "no",
                     run.exp2_fallbacks, run.exp2_total));
}

// ---------------------------------------------------------------------------
// 10: epsilon-greedy frequencies

void criterion_10() {
  std::mt19937_64 rng(42);
  bandit::WeightReport report{"f", bandit::Algorithm::epsilon_greedy,
                              {{"local", 2.09}, {"londonServer", 3.57}, {"frankfurtServer", 1.18}}};
  std::map<std::string, int> counts;
  constexpr int draws = 10'000;
  for (int i = 0; i < draws; ++i) {
    ++counts[bandit::epsilon_greedy_select(report, 1.0, rng)];
  }
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& id : {"local", "londonServer", "frankfurtServer"}) {
    const double f = static_cast<double>(counts[id]) / draws;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }

  bool greedy = true;
  std::uniform_real_distribution<double> weight(0.0, 10.0);
  for (int i = 0; i < 2000; ++i) {
    bandit::WeightReport random{"f", bandit::Algorithm::epsilon_greedy, {}};
    for (const auto* id : {"a", "b", "c"}) {
      random.weights[id] = weight(rng);
    }
    std::string expected = "a";
    for (const auto& [id, w] : random.weights) {
      if (*w < *random.weights[expected]) {
        expected = id;
      }
    }
    greedy = greedy && bandit::epsilon_greedy_select(random, 0.0, rng) == expected;
  }
  record(10, "epsilon-greedy statistics", lo >= 0.31 && hi <= 0.36 && greedy,
         fmt::format("epsilon 1: frequencies within [{:.4f}, {:.4f}]; epsilon 0 always argmin: {}",
                     lo, hi, greedy ? "yes" : "no"));
}

template <typename T>
std::vector<T> collect(std::vector<std::future<T>>& futures) {
  std::vector<T> out;
  for (auto& f : futures) {
    out.push_back(f.get());
  }
  return out;
}

} // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const auto start = Clock::now();

  // The full-scale Exp. 3 run takes about four and a half minutes; it
  // overlaps everything else.
  auto full_scale = std::async(std::launch::async, [] {
    experiment::PlanOverrides overrides;
    overrides.scale = 1.0;
    return run_plan(plan_for(Scenario::exp3, 1, overrides)).results;
  });

  criterion(1, "bandit math oracle equivalence", criterion_1);
  criterion(10, "epsilon-greedy statistics", criterion_10);
  criterion(8, "wire-format conformance", criterion_8);

  {
    const auto sweep_start = Clock::now();
    std::vector<std::future<std::vector<IterationResult>>> sweep;
    for (int seed = 1; seed <= exp1_seeds; ++seed) {
      sweep.push_back(std::async(std::launch::async, [seed] {
        return run_plan(plan_for(Scenario::exp1, static_cast<std::uint64_t>(seed))).results;
      }));
    }
    try {
      const auto runs = collect(sweep);
      criteria_2_3_5(runs, seconds_since(sweep_start));
    } catch (const std::exception& error) {
      for (int n : {2, 3, 5}) {
        record(n, "Exp. 1 sweep", false, std::string("exception: ") + error.what());
      }
    }
  }

  std::vector<std::future<FallbackRun>> exp2;
  std::vector<std::future<std::vector<IterationResult>>> exp3;
  std::vector<std::future<std::vector<IterationResult>>> exp4;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    exp2.push_back(std::async(std::launch::async, [seed] { return exp2_run(seed); }));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    exp3.push_back(std::async(std::launch::async, [seed] {
      return run_plan(plan_for(Scenario::exp3, seed)).results;
    }));
    exp4.push_back(std::async(std::launch::async, [seed] {
      return run_plan(plan_for(Scenario::exp4, seed)).results;
    }));
  }
  auto persistence = std::async(std::launch::async, persistence_run);

  criterion(4, "fallback to local", [&] { criterion_4(collect(exp2)); });
  criterion(7, "Exp. 4 shape", [&] { criterion_7(collect(exp4), 0.1); });
  criterion(9, "persistence across restart", [&] { criterion_9(persistence.get()); });
  criterion(6, "Exp. 3 shape", [&] { criterion_6(collect(exp3), full_scale.get()); });

  std::sort(verdicts.begin(), verdicts.end(),
            [](const auto& a, const auto& b) { return a.number < b.number; });
  const auto passed = std::count_if(verdicts.begin(), verdicts.end(),
                                    [](const auto& v) { return v.pass; });
  fmt::print("\nsummary ({:.0f} s)\n", seconds_since(start));
  for (const auto& v : verdicts) {
    fmt::print("  {:>2} {} {}\n", v.number, v.pass ? "PASS" : "FAIL", v.title);
  }
  fmt::print("{}/{} criteria passed\n", passed, verdicts.size());
  return passed == static_cast<long>(verdicts.size()) && verdicts.size() == 10 ? 0 : 1;
}
