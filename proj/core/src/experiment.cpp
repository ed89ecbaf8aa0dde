#include "fogroute/experiment.hpp"

#include "httplib.h"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

namespace fogroute::experiment {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
  case Scenario::exp1:
    return "exp1";
  case Scenario::exp2:
    return "exp2";
  case Scenario::exp3:
    return "exp3";
  case Scenario::exp4:
    return "exp4";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  for (auto scenario : {Scenario::exp1, Scenario::exp2, Scenario::exp3, Scenario::exp4}) {
    if (name == to_string(scenario)) {
      return scenario;
    }
  }
  throw std::invalid_argument("unknown scenario: " + std::string(name));
}

void ExperimentPlan::validate() const {
  if (iterations == 0) {
    throw std::invalid_argument("plan needs at least one iteration");
  }
  if (functions.empty()) {
    throw std::invalid_argument("plan needs at least one function");
  }
  if (!(scale > 0.0)) {
    throw std::invalid_argument("scale must be positive");
  }
  if (remote_timeout && !(*remote_timeout > 0.0)) {
    throw std::invalid_argument("remote timeout must be positive");
  }
  std::map<std::tuple<std::uint64_t, std::string, sim::Fault>, const FaultAction*> seen;
  for (const auto& action : fault_schedule) {
    if (action.iteration < 1 || action.iteration > iterations) {
      throw std::invalid_argument(fmt::format("fault at iteration {} outside [1, {}]",
                                              action.iteration, iterations));
    }
    const auto key = std::make_tuple(action.iteration, action.environment, action.fault);
    const auto [it, inserted] = seen.emplace(key, &action);
    if (!inserted && (it->second->value != action.value || it->second->mode != action.mode)) {
      throw std::invalid_argument(fmt::format("conflicting {} faults for {} at iteration {}",
                                              sim::to_string(action.fault), action.environment,
                                              action.iteration));
    }
  }
}

std::vector<std::uint64_t> ExperimentPlan::fault_iterations() const {
  std::set<std::uint64_t> unique;
  for (const auto& action : fault_schedule) {
    unique.insert(action.iteration);
  }
  return {unique.begin(), unique.end()};
}

ordered_json to_json(const ExperimentPlan& plan) {
  auto faults = ordered_json::array();
  for (const auto& action : plan.fault_schedule) {
    ordered_json item{{"iteration", action.iteration},
                      {"env", action.environment},
                      {"fault", sim::to_string(action.fault)},
                      {"value", ordered_json::parse(action.value.dump())}};
    if (action.mode) {
      item["mode"] = sim::to_string(*action.mode);
    }
    faults.push_back(std::move(item));
  }
  ordered_json document{{"scenario", to_string(plan.scenario)},
                        {"iterations", plan.iterations},
                        {"functions", plan.functions},
                        {"algorithm", bandit::to_string(plan.algorithm)},
                        {"seed", plan.seed},
                        {"scale", plan.scale},
                        {"warmup_iterations", plan.warmup_iterations},
                        {"jitter", plan.jitter},
                        {"interleaving", "round_robin"},
                        {"fault_schedule", faults}};
  document["remote_timeout"] =
      plan.remote_timeout ? ordered_json(*plan.remote_timeout) : ordered_json(nullptr);
  return document;
}

ExperimentPlan plan_from_json(const json& document) {
  ExperimentPlan plan;
  plan.scenario = parse_scenario(document.at("scenario").get<std::string>());
  plan.iterations = document.at("iterations").get<std::uint64_t>();
  plan.functions = document.at("functions").get<std::vector<std::string>>();
  plan.algorithm = bandit::parse_algorithm(document.at("algorithm").get<std::string>());
  plan.seed = document.value("seed", plan.seed);
  plan.scale = document.value("scale", plan.scale);
  plan.warmup_iterations = document.value("warmup_iterations", plan.warmup_iterations);
  plan.jitter = document.value("jitter", plan.jitter);
  if (document.contains("remote_timeout") && !document["remote_timeout"].is_null()) {
    plan.remote_timeout = document["remote_timeout"].get<double>();
  }
  for (const auto& item : document.value("fault_schedule", json::array())) {
    FaultAction action;
    action.iteration = item.at("iteration").get<std::uint64_t>();
    action.environment = item.at("env").get<std::string>();
    action.fault = sim::parse_fault(item.at("fault").get<std::string>());
    action.value = item.at("value");
    if (item.contains("mode")) {
      action.mode = sim::parse_unreachable_mode(item["mode"].get<std::string>());
    }
    plan.fault_schedule.push_back(std::move(action));
  }
  plan.validate();
  return plan;
}

namespace {

std::string heavy_function(const Config& config) {
  if (config.find_function("func_heavy") != nullptr) {
    return "func_heavy";
  }
  for (const auto& fn : config.functions) {
    if (!fn.cloud_only) {
      return fn.name;
    }
  }
  throw std::invalid_argument("configuration has no function that can fall back locally");
}

std::vector<std::string> cloud_ids(const Config& config) {
  std::vector<std::string> ids;
  for (const auto& env : config.environments) {
    if (env.kind == EnvironmentKind::cloud) {
      ids.push_back(env.id);
    }
  }
  return ids;
}

} // namespace

ExperimentPlan make_plan(Scenario scenario, const Config& config, const PlanOverrides& overrides) {
  ExperimentPlan plan;
  plan.scenario = scenario;
  plan.algorithm = config.defaults.algorithm;
  // Faults land after request number 50.
  constexpr std::uint64_t fault_iteration = 51;

  switch (scenario) {
  case Scenario::exp1:
    plan.iterations = 99;
    for (const auto& fn : config.functions) {
      plan.functions.push_back(fn.name);
    }
    break;
  case Scenario::exp2:
    plan.iterations = 10;
    plan.functions = {heavy_function(config)};
    plan.algorithm = bandit::Algorithm::bayes_ucb;
    plan.warmup_iterations = 30;
    for (const auto& id : cloud_ids(config)) {
      plan.fault_schedule.push_back({1, id, sim::Fault::reachable, false, sim::UnreachableMode::drop});
    }
    break;
  case Scenario::exp3:
    plan.iterations = 99;
    plan.functions = {heavy_function(config)};
    plan.remote_timeout = 2.25;
    for (const auto& id : cloud_ids(config)) {
      plan.fault_schedule.push_back(
          {fault_iteration, id, sim::Fault::reachable, false, sim::UnreachableMode::drop});
    }
    break;
  case Scenario::exp4:
    plan.iterations = 249;
    plan.functions = {heavy_function(config)};
    // Lagged requests must complete rather than time out, or the arms
    // would never observe the lag.
    plan.remote_timeout = 10.0;
    for (const auto& id : cloud_ids(config)) {
      plan.fault_schedule.push_back({fault_iteration, id, sim::Fault::bandwidth_penalty,
                                     config.simulator.bandwidth_penalty_ms, std::nullopt});
    }
    break;
  }

  if (overrides.iterations) {
    plan.iterations = *overrides.iterations;
  }
  if (overrides.seed) {
    plan.seed = *overrides.seed;
  }
  plan.scale = overrides.scale.value_or(0.1);
  if (overrides.algorithm) {
    plan.algorithm = *overrides.algorithm;
  }
  if (overrides.warmup) {
    plan.warmup_iterations = *overrides.warmup;
  }
  if (overrides.remote_timeout) {
    plan.remote_timeout = *overrides.remote_timeout;
  }
  plan.jitter = overrides.jitter.value_or(scenario == Scenario::exp4 &&
                                          plan.algorithm == bandit::Algorithm::bayes_ucb);
  plan.validate();
  return plan;
}

// ---------------------------------------------------------------------------
// HTTP endpoints

HttpProxyEndpoint::HttpProxyEndpoint(std::string base_url) : base_url_(std::move(base_url)) {}

InvokeReply HttpProxyEndpoint::invoke(const std::string& function, bandit::Algorithm algorithm) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(600));
  const json request{{"payload", json::object()},
                     {"options", {{"algorithm", bandit::to_string(algorithm)}}}};

  const auto started = std::chrono::steady_clock::now();
  auto response = client.Post("/function/" + function, request.dump(), "application/json");
  InvokeReply reply;
  reply.total_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!response) {
    throw ProxyUnreachable("proxy at " + base_url_ + " unreachable: " +
                           httplib::to_string(response.error()));
  }
  reply.status = response->status;
  reply.body = json::parse(response->body, nullptr, false);
  reply.chosen = response->get_header_value("X-Fogroute-Chosen");
  reply.serving = response->get_header_value("X-Fogroute-Serving");
  reply.outcome = response->get_header_value("X-Fogroute-Outcome");
  if (reply.status == 200 && reply.body.is_object() && reply.body.contains("swarm") &&
      reply.body["swarm"].is_string()) {
    reply.serving = reply.body["swarm"].get<std::string>();
  }
  return reply;
}

json HttpProxyEndpoint::weight_scale(const std::string& function,
                                     bandit::Algorithm algorithm) const {
  httplib::Client client(base_url_);
  auto response = client.Get("/weight_scale?function=" + function +
                             "&algorithm=" + std::string(bandit::to_string(algorithm)));
  if (!response) {
    throw ProxyUnreachable("proxy at " + base_url_ + " unreachable");
  }
  return json::parse(response->body, nullptr, false);
}

HttpFaultController::HttpFaultController(std::string admin_url)
    : admin_url_(std::move(admin_url)) {}

void HttpFaultController::inject(const FaultAction& action) {
  httplib::Client client(admin_url_);
  json body{{"env", action.environment},
            {"fault", sim::to_string(action.fault)},
            {"value", action.value}};
  if (action.mode) {
    body["mode"] = sim::to_string(*action.mode);
  }
  auto response = client.Post("/admin/inject", body.dump(), "application/json");
  if (!response) {
    throw std::runtime_error("simulator admin at " + admin_url_ + " unreachable");
  }
  if (response->status != 200) {
    throw std::runtime_error("fault injection rejected: " + response->body);
  }
}

// ---------------------------------------------------------------------------
// run

RunOutcome run(const ExperimentPlan& plan, ProxyEndpoint& proxy, FaultController& faults,
               const ProgressCallback& progress) {
  plan.validate();
  RunOutcome outcome;
  try {
    for (std::uint64_t round = 1; round <= plan.warmup_iterations; ++round) {
      for (const auto& function : plan.functions) {
        (void)proxy.invoke(function, plan.algorithm);
      }
    }
    for (std::uint64_t iteration = 1; iteration <= plan.iterations; ++iteration) {
      for (const auto& action : plan.fault_schedule) {
        if (action.iteration == iteration) {
          faults.inject(action);
        }
      }
      for (const auto& function : plan.functions) {
        const auto reply = proxy.invoke(function, plan.algorithm);
        IterationResult result;
        result.iteration = iteration;
        result.function = function;
        result.chosen = reply.chosen;
        result.ok = reply.status == 200;
        result.serving = result.ok ? reply.serving : std::string{};
        result.total_time = reply.total_time;
        result.fallback = result.ok && result.chosen != result.serving;
        result.outcome = reply.outcome;
        outcome.results.push_back(result);
        if (progress) {
          progress(result);
        }
      }
    }
  } catch (const std::exception& error) {
    outcome.aborted = true;
    outcome.error = error.what();
    spdlog::error("experiment aborted after {} results: {}", outcome.results.size(),
                  error.what());
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// analysis

std::vector<double> cumulative_average(const std::vector<double>& totals) {
  std::vector<double> averages;
  averages.reserve(totals.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < totals.size(); ++i) {
    sum += totals[i];
    averages.push_back(sum / static_cast<double>(i + 1));
  }
  return averages;
}

std::vector<IterationResult> for_function(const std::vector<IterationResult>& results,
                                          const std::string& function) {
  std::vector<IterationResult> selected;
  std::copy_if(results.begin(), results.end(), std::back_inserter(selected),
               [&](const auto& r) { return r.function == function; });
  std::stable_sort(selected.begin(), selected.end(),
                   [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
  return selected;
}

std::optional<std::uint64_t> detect_crossover(const std::vector<IterationResult>& results,
                                              std::uint64_t fault_iteration,
                                              const std::string& local_environment,
                                              std::uint64_t window) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].iteration < fault_iteration) {
      continue;
    }
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    std::size_t local = 0;
    for (std::size_t j = first; j <= i; ++j) {
      if (results[j].ok && results[j].serving == local_environment) {
        ++local;
      }
    }
    if (2 * local > i + 1 - first) {
      return results[i].iteration;
    }
  }
  return std::nullopt;
}

double remote_fraction(const std::vector<IterationResult>& results, std::uint64_t first,
                       std::uint64_t last, const std::string& local_environment) {
  std::size_t total = 0;
  std::size_t remote = 0;
  for (const auto& r : results) {
    if (r.iteration < first || r.iteration > last || !r.ok) {
      continue;
    }
    ++total;
    if (r.serving != local_environment) {
      ++remote;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(remote) / static_cast<double>(total);
}

const FunctionReport& Report::function(const std::string& name) const {
  const auto it = std::find_if(functions.begin(), functions.end(),
                               [&](const auto& f) { return f.function == name; });
  if (it == functions.end()) {
    throw std::out_of_range("no report for function " + name);
  }
  return *it;
}

Report summarize(const std::vector<IterationResult>& results,
                 const std::vector<std::uint64_t>& fault_iterations, std::string scenario,
                 std::string local_environment) {
  if (results.empty()) {
    throw std::invalid_argument("summarize needs at least one result");
  }
  Report report;
  report.scenario = std::move(scenario);
  report.local_environment = std::move(local_environment);
  report.fault_iterations = fault_iterations;
  std::sort(report.fault_iterations.begin(), report.fault_iterations.end());

  std::vector<std::string> order;
  for (const auto& r : results) {
    if (std::find(order.begin(), order.end(), r.function) == order.end()) {
      order.push_back(r.function);
    }
  }

  for (const auto& name : order) {
    const auto rows = for_function(results, name);
    FunctionReport fr;
    fr.function = name;
    fr.requests = rows.size();
    std::vector<double> totals;
    std::uint64_t ok = 0;
    for (const auto& r : rows) {
      totals.push_back(r.total_time);
      fr.chosen_frequency[r.chosen] += 1.0;
      if (!r.ok) {
        ++fr.failures;
        continue;
      }
      ++ok;
      fr.serving_frequency[r.serving] += 1.0;
      if (r.fallback) {
        ++fr.fallbacks;
      }
    }
    for (auto& [env, count] : fr.serving_frequency) {
      count /= static_cast<double>(ok);
    }
    for (auto& [env, count] : fr.chosen_frequency) {
      count /= static_cast<double>(rows.size());
    }
    fr.cumulative_average = cumulative_average(totals);

    const auto last_iteration = rows.back().iteration;
    std::vector<std::uint64_t> starts{1};
    for (const auto f : report.fault_iterations) {
      if (f > 1 && f <= last_iteration) {
        starts.push_back(f);
      }
    }
    for (std::size_t p = 0; p < starts.size(); ++p) {
      PhaseMean phase{starts[p], p + 1 < starts.size() ? starts[p + 1] - 1 : last_iteration};
      double sum = 0.0;
      for (const auto& r : rows) {
        if (r.iteration >= phase.first && r.iteration <= phase.last) {
          sum += r.total_time;
          ++phase.count;
        }
      }
      if (phase.count > 0) {
        phase.mean = sum / static_cast<double>(phase.count);
        fr.phases.push_back(phase);
      }
    }
    if (!report.fault_iterations.empty()) {
      fr.crossover =
          detect_crossover(rows, report.fault_iterations.front(), report.local_environment);
    }
    report.functions.push_back(std::move(fr));
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view iterations_header =
    "iteration,function,chosen,serving,total_time_s,fallback,ok,outcome\n";

std::string number(double value) { return fmt::format("{:.6f}", value); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
}

std::vector<std::string> split(const std::string& line, char separator) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, separator)) {
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == separator) {
    fields.emplace_back();
  }
  return fields;
}

} // namespace

std::string iterations_csv(const std::vector<IterationResult>& results) {
  std::string out(iterations_header);
  for (const auto& r : results) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.iteration, r.function, r.chosen, r.serving,
                       number(r.total_time), r.fallback ? 1 : 0, r.ok ? 1 : 0, r.outcome);
  }
  return out;
}

std::string cumulative_csv(const Report& report) {
  std::string out = "function,iteration,cumulative_average_s\n";
  for (const auto& fr : report.functions) {
    for (std::size_t i = 0; i < fr.cumulative_average.size(); ++i) {
      out += fmt::format("{},{},{}\n", fr.function, i + 1, number(fr.cumulative_average[i]));
    }
  }
  return out;
}

std::string summary_csv(const Report& report) {
  std::string faults;
  for (const auto f : report.fault_iterations) {
    faults += (faults.empty() ? "" : ";") + std::to_string(f);
  }
  std::string out = "section,function,key,value\n";
  out += fmt::format("meta,,scenario,{}\n", report.scenario);
  out += fmt::format("meta,,interleaving,{}\n", report.interleaving);
  out += fmt::format("meta,,local_environment,{}\n", report.local_environment);
  out += fmt::format("meta,,fault_iterations,{}\n", faults);
  for (const auto& fr : report.functions) {
    out += fmt::format("requests,{},total,{}\n", fr.function, fr.requests);
    out += fmt::format("requests,{},failures,{}\n", fr.function, fr.failures);
    out += fmt::format("requests,{},fallbacks,{}\n", fr.function, fr.fallbacks);
    for (const auto& [env, share] : fr.chosen_frequency) {
      out += fmt::format("chosen_frequency,{},{},{}\n", fr.function, env, number(share));
    }
    for (const auto& [env, share] : fr.serving_frequency) {
      out += fmt::format("serving_frequency,{},{},{}\n", fr.function, env, number(share));
    }
    for (const auto& phase : fr.phases) {
      out += fmt::format("phase_mean,{},{}-{},{}\n", fr.function, phase.first, phase.last,
                         number(phase.mean));
    }
    if (!fr.cumulative_average.empty()) {
      out += fmt::format("cumulative_average,{},final,{}\n", fr.function,
                         number(fr.cumulative_average.back()));
    }
    out += fmt::format("crossover,{},iteration,{}\n", fr.function,
                       fr.crossover ? std::to_string(*fr.crossover) : "none");
  }
  return out;
}

void emit(const std::vector<IterationResult>& results, const Report& report,
          const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) {
    throw std::runtime_error("cannot create " + directory.string() + ": " + ec.message());
  }
  write_file(directory / iterations_file, iterations_csv(results));
  write_file(directory / cumulative_file, cumulative_csv(report));
  write_file(directory / summary_file, summary_csv(report));
}

std::vector<IterationResult> parse_iterations_csv(const std::string& text) {
  std::vector<IterationResult> results;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != iterations_header) {
    throw std::invalid_argument("unexpected iterations header");
  }
  std::size_t number_of_line = 1;
  while (std::getline(in, line)) {
    ++number_of_line;
    if (line.empty()) {
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 8) {
      throw std::invalid_argument(fmt::format("line {}: expected 8 fields", number_of_line));
    }
    IterationResult r;
    try {
      r.iteration = std::stoull(fields[0]);
      r.function = fields[1];
      r.chosen = fields[2];
      r.serving = fields[3];
      r.total_time = std::stod(fields[4]);
      r.fallback = fields[5] == "1";
      r.ok = fields[6] == "1";
      r.outcome = fields[7];
    } catch (const std::logic_error&) {
      throw std::invalid_argument(fmt::format("line {}: malformed number", number_of_line));
    }
    results.push_back(std::move(r));
  }
  return results;
}

std::vector<IterationResult> read_iterations(const std::filesystem::path& directory) {
  std::ifstream in(directory / iterations_file, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + (directory / iterations_file).string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_iterations_csv(buffer.str());
}

} // namespace fogroute::experiment
