#include "fogroute/proxy.hpp"

#include "httplib.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>

namespace fogroute::proxy {

using nlohmann::json;
using nlohmann::ordered_json;

InvocationOptions options_from_json(const json& options) {
  InvocationOptions result;
  if (options.is_null()) {
    return result;
  }
  if (!options.is_object()) {
    throw std::invalid_argument("options must be an object");
  }
  try {
    if (options.contains("algorithm") && !options["algorithm"].is_null()) {
      result.algorithm = bandit::parse_algorithm(options["algorithm"].get<std::string>());
    }
    if (options.contains("force_target") && !options["force_target"].is_null()) {
      result.force_target = options["force_target"].get<std::string>();
    }
    if (options.contains("epsilon") && !options["epsilon"].is_null()) {
      result.epsilon = options["epsilon"].get<double>();
    }
    if (options.contains("c") && !options["c"].is_null()) {
      result.c = options["c"].get<double>();
    }
  } catch (const json::exception& error) {
    throw std::invalid_argument(std::string("malformed options: ") + error.what());
  }
  if (result.epsilon && (*result.epsilon < 0.0 || *result.epsilon > 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (result.c && !(*result.c > 0.0)) {
    throw std::invalid_argument("c must be positive");
  }
  return result;
}

json to_json(const InvocationOptions& options) {
  json result = json::object();
  result["algorithm"] =
      options.algorithm ? json(bandit::to_string(*options.algorithm)) : json(nullptr);
  result["force_target"] = options.force_target ? json(*options.force_target) : json(nullptr);
  if (options.epsilon) {
    result["epsilon"] = *options.epsilon;
  }
  if (options.c) {
    result["c"] = *options.c;
  }
  return result;
}

std::string_view to_string(SelectionReason reason) {
  switch (reason) {
  case SelectionReason::forced:
    return "forced";
  case SelectionReason::pinned:
    return "pinned";
  case SelectionReason::cold_start:
    return "cold_start";
  case SelectionReason::weighted:
    return "weighted";
  }
  return "unknown";
}

std::vector<std::string> candidate_environments(const Config& config,
                                                const FunctionSpec& function) {
  std::vector<std::string> result;
  for (const auto& env : config.environments) {
    if (!function.registered_environments.contains(env.id)) {
      continue;
    }
    if (function.cloud_only && env.kind == EnvironmentKind::local) {
      continue;
    }
    result.push_back(env.id);
  }
  return result;
}

bandit::WeightParams weight_params(const Config& config, const InvocationOptions& options) {
  return {options.epsilon.value_or(config.defaults.epsilon),
          options.c.value_or(config.defaults.c), config.defaults.exploration_unit_ms / 1000.0};
}

bandit::WeightReport weight_scale(const Config& config, const FunctionSpec& function,
                                  bandit::Algorithm algorithm, const bandit::WeightParams& params,
                                  const bandit::ArmTable& arms) {
  const auto environments = candidate_environments(config, function);
  return bandit::compute_weights(function.name, arms, environments, algorithm, params);
}

Selection select_environment(const Config& config, const FunctionSpec& function,
                             const InvocationOptions& options, const bandit::ArmTable& arms,
                             std::mt19937_64& rng) {
  const auto environments = candidate_environments(config, function);
  if (environments.empty()) {
    throw std::invalid_argument("function " + function.name + " has no candidate environment");
  }
  const auto is_candidate = [&](const std::string& id) {
    return std::find(environments.begin(), environments.end(), id) != environments.end();
  };

  Selection selection;
  std::string head;
  if (options.force_target) {
    if (!is_candidate(*options.force_target)) {
      throw std::invalid_argument("function " + function.name + " cannot run on " +
                                  *options.force_target);
    }
    head = *options.force_target;
    selection.reason = SelectionReason::forced;
  } else if (function.pinned_environment) {
    head = *function.pinned_environment;
    selection.reason = SelectionReason::pinned;
  } else {
    const auto algorithm = options.algorithm.value_or(config.defaults.algorithm);
    if (auto cold = bandit::cold_start_order(arms, environments, algorithm)) {
      head = std::move(*cold);
      selection.reason = SelectionReason::cold_start;
    } else {
      const auto params = weight_params(config, options);
      auto report =
          bandit::compute_weights(function.name, arms, environments, algorithm, params);
      head = algorithm == bandit::Algorithm::epsilon_greedy
                 ? bandit::epsilon_greedy_select(report, params.epsilon, rng)
                 : report.argmin().value();
      selection.weights = std::move(report);
      selection.reason = SelectionReason::weighted;
    }
  }

  selection.candidates.push_back(head);
  const auto& local = config.local_environment().id;
  if (!function.cloud_only && head != local && is_candidate(local)) {
    selection.candidates.push_back(local);
  }
  return selection;
}

ordered_json weight_report_json(const bandit::WeightReport& report,
                                const std::vector<std::string>& order) {
  ordered_json body{{"status", "success"}};
  for (const auto& id : order) {
    const auto it = report.weights.find(id);
    if (it == report.weights.end()) {
      continue;
    }
    if (it->second) {
      body[id] = *it->second;
    } else {
      body[id] = cold_start_marker;
    }
  }
  return body;
}

// ---------------------------------------------------------------------------
// HttpForwarder

ForwardResult HttpForwarder::forward(const EnvironmentDescriptor& environment,
                                     const std::string& function, const std::string& payload) {
  ForwardResult result;
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  try {
    httplib::Client client(environment.base_address);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(environment.request_timeout));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_keep_alive(false);

    auto response = client.Post("/function/" + function, payload.empty() ? "{}" : payload,
                                "application/json");
    result.duration = elapsed();
    if (!response) {
      result.error = "transport error: " + httplib::to_string(response.error());
      return result;
    }
    result.http_status = response->status;
    if (response->status < 200 || response->status >= 300) {
      result.error = "upstream status " + std::to_string(response->status);
      return result;
    }
    result.parsed = json::parse(response->body, nullptr, false);
    if (result.parsed.is_discarded() || !result.parsed.is_object()) {
      result.error = "malformed upstream response";
      return result;
    }
    result.body = std::move(response->body);
    result.ok = true;
  } catch (const std::exception& error) {
    result.duration = elapsed();
    result.error = error.what();
  }
  return result;
}

// ---------------------------------------------------------------------------
// ProxyService

ProxyService::ProxyService(Config config, metrics::MetricsStore& store, Forwarder& forwarder,
                           std::uint64_t seed)
    : config_(std::move(config)), store_(store), forwarder_(forwarder), rng_(seed) {
  config_.validate();
}

const FunctionSpec& ProxyService::function_spec(const std::string& function) const {
  const auto* spec = config_.find_function(function);
  if (spec == nullptr) {
    throw UnknownFunction("unknown function: " + function);
  }
  return *spec;
}

Selection ProxyService::select(const std::string& function, const InvocationOptions& options) {
  const auto& spec = function_spec(function);
  const auto arms = store_.arm_table(function);
  std::lock_guard lock(rng_mutex_);
  return select_environment(config_, spec, options, arms, rng_);
}

bandit::WeightReport ProxyService::weight_scale(const std::string& function,
                                                const InvocationOptions& options) const {
  const auto& spec = function_spec(function);
  return proxy::weight_scale(config_, spec, options.algorithm.value_or(config_.defaults.algorithm),
                             weight_params(config_, options), store_.arm_table(function));
}

InvokeResult ProxyService::invoke(const std::string& function, const std::string& payload,
                                  const InvocationOptions& options) {
  InvokeResult result;
  result.selection = select(function, options);
  result.chosen = result.selection.candidates.front();

  bool remote_failed = false;
  for (const auto& id : result.selection.candidates) {
    const auto& env = config_.environment(id);
    auto forwarded = forwarder_.forward(env, function, payload);
    result.attempts.push_back({id, forwarded.ok, forwarded.duration, forwarded.error});

    if (!forwarded.ok) {
      spdlog::info("{} on {} failed after {:.3f}s: {}", function, id, forwarded.duration,
                   forwarded.error);
      // Kept for diagnostics only; failures never feed the arm.
      store_.insert_duration({function, id, forwarded.duration, {}, metrics::Outcome::failure});
      remote_failed = true;
      continue;
    }

    std::string serving = id;
    if (const auto swarm = forwarded.parsed.find("swarm");
        swarm != forwarded.parsed.end() && swarm->is_string() &&
        config_.find_environment(swarm->get<std::string>()) != nullptr) {
      serving = swarm->get<std::string>();
    }
    result.outcome = remote_failed ? metrics::Outcome::remote_failure_then_fallback
                                   : metrics::Outcome::success;
    store_.insert_duration({function, serving, forwarded.duration, {}, result.outcome});
    result.serving = serving;
    result.body = std::move(forwarded.body);
    result.http_status = 200;
    return result;
  }

  result.outcome = metrics::Outcome::failure;
  result.http_status = 502;
  auto attempts = ordered_json::array();
  for (const auto& attempt : result.attempts) {
    attempts.push_back(ordered_json{{"environment", attempt.environment},
                                    {"duration", attempt.duration},
                                    {"error", attempt.error}});
  }
  const auto& spec = function_spec(function);
  result.body = ordered_json{{"status", "error"},
                             {"message", spec.cloud_only
                                             ? "all candidate environments failed; cloud-only "
                                               "functions have no local fallback"
                                             : "all candidate environments failed"},
                             {"attempts", attempts}}
                    .dump();
  return result;
}

} // namespace fogroute::proxy
