#include "fogroute/simulator.hpp"

#include "http_listener.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

namespace fogroute::sim {

using nlohmann::json;
using nlohmann::ordered_json;

Fault parse_fault(std::string_view name) {
  for (auto fault : {Fault::reachable, Fault::latency, Fault::bandwidth_penalty}) {
    if (name == to_string(fault)) {
      return fault;
    }
  }
  throw std::invalid_argument("unknown fault: " + std::string(name));
}

std::string_view to_string(Fault fault) {
  switch (fault) {
  case Fault::reachable:
    return "reachable";
  case Fault::latency:
    return "latency";
  case Fault::bandwidth_penalty:
    return "bandwidth_penalty";
  }
  return "unknown";
}

UnreachableMode parse_unreachable_mode(std::string_view name) {
  if (name == "refuse") {
    return UnreachableMode::refuse;
  }
  if (name == "drop") {
    return UnreachableMode::drop;
  }
  throw std::invalid_argument("unknown unreachable mode: " + std::string(name));
}

std::string_view to_string(UnreachableMode mode) {
  return mode == UnreachableMode::refuse ? "refuse" : "drop";
}

SimulatorOptions options_from(const SimulatorSettings& settings) {
  return {settings.scale, settings.jitter, settings.jitter_ms, settings.drop_hold_seconds,
          settings.seed};
}

namespace {

std::string node_info(const std::string& environment) {
  // Stable container-style id per environment.
  std::uint64_t hash = 1469598103934665603ULL;
  for (const unsigned char ch : environment) {
    hash = (hash ^ ch) * 1099511628211ULL;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buffer, 12);
}

std::string weight_class(const std::string& function) {
  if (function == "func_light") {
    return "LIGHT";
  }
  if (function == "func_heavy") {
    return "HEAVY";
  }
  if (function == "func_super_heavy") {
    return "SUPER HEAVY";
  }
  if (function == "func_obese_heavy") {
    return "OBESE HEAVY";
  }
  return "CUSTOM";
}

} // namespace

Simulator::Simulator(const Config& config, SimulatorOptions options)
    : options_(options), rng_(options.seed) {
  if (!(options_.scale > 0.0) || options_.jitter_ms < 0.0) {
    throw std::invalid_argument("simulator scale must be positive and jitter non-negative");
  }
  for (const auto& env : config.environments) {
    SimulatedEnvironment state;
    state.id = env.id;
    state.kind = env.kind;
    state.base_latency_ms = env.latency_ms;
    environments_.emplace(env.id, state);
  }
  for (const auto& fn : config.functions) {
    profiles_.emplace(fn.name, FunctionProfile{fn.name, fn.local_service_time,
                                               fn.cloud_service_time, fn.cloud_only});
  }
}

Simulator::~Simulator() { shutdown(); }

ordered_json Simulator::response_body(const std::string& environment,
                                      const std::string& function) {
  return ordered_json{
      {"nodeInfo", node_info(environment)},
      {"swarm", environment},
      {"message", "I was able to achieve this result using " + weight_class(function) +
                      " calculations"},
      {"status", "The light is ON"},
  };
}

double Simulator::planned_delay(const std::string& environment,
                                const std::string& function) const {
  const auto profile = profiles_.find(function);
  if (profile == profiles_.end()) {
    throw NotFound("unknown function: " + function);
  }
  const auto state = this->state(environment);
  double service = profile->second.cloud_service_time;
  if (state.kind == EnvironmentKind::local) {
    if (!profile->second.local_service_time || profile->second.cloud_only) {
      throw NotFound(function + " is not installed on " + environment);
    }
    service = *profile->second.local_service_time;
  }
  const double network = (state.base_latency_ms + state.bandwidth_penalty_ms) / 1000.0;
  return options_.scale * (service + network);
}

double Simulator::jitter_seconds() {
  if (!options_.jitter || options_.jitter_ms == 0.0) {
    return 0.0;
  }
  std::lock_guard lock(rng_mutex_);
  std::normal_distribution<double> noise(0.0, options_.scale * options_.jitter_ms / 1000.0);
  return noise(rng_);
}

ordered_json Simulator::serve(const std::string& environment, const std::string& function,
                              const json& /*payload*/) {
  const auto state = this->state(environment);
  if (!state.reachable) {
    throw EnvironmentUnreachable(environment, state.unreachable_mode);
  }
  const double delay = std::max(0.0, planned_delay(environment, function) + jitter_seconds());
  std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  return response_body(environment, function);
}

void Simulator::inject(const std::string& environment, Fault fault, const json& value,
                       std::optional<UnreachableMode> mode) {
  SimulatedEnvironment changed;
  bool reachability_changed = false;
  {
    std::unique_lock lock(state_mutex_);
    const auto it = environments_.find(environment);
    if (it == environments_.end()) {
      throw std::invalid_argument("unknown environment: " + environment);
    }
    auto& state = it->second;
    switch (fault) {
    case Fault::reachable: {
      if (!value.is_boolean()) {
        throw std::invalid_argument("reachable expects a boolean");
      }
      const bool reachable = value.get<bool>();
      const auto new_mode = mode.value_or(state.unreachable_mode);
      reachability_changed = reachable != state.reachable || new_mode != state.unreachable_mode;
      state.reachable = reachable;
      state.unreachable_mode = new_mode;
      break;
    }
    case Fault::latency:
    case Fault::bandwidth_penalty: {
      if (!value.is_number()) {
        throw std::invalid_argument(std::string(to_string(fault)) + " expects milliseconds");
      }
      const double ms = value.get<double>();
      if (!std::isfinite(ms) || ms < 0.0) {
        throw std::invalid_argument(std::string(to_string(fault)) + " must be non-negative");
      }
      (fault == Fault::latency ? state.base_latency_ms : state.bandwidth_penalty_ms) = ms;
      break;
    }
    }
    changed = state;
  }
  spdlog::debug("inject {} {}={}", environment, to_string(fault), value.dump());
  hold_cv_.notify_all();
  if (reachability_changed) {
    std::lock_guard lock(listener_mutex_);
    if (listener_) {
      listener_(changed);
    }
  }
}

SimulatedEnvironment Simulator::state(const std::string& environment) const {
  std::shared_lock lock(state_mutex_);
  const auto it = environments_.find(environment);
  if (it == environments_.end()) {
    throw NotFound("unknown environment: " + environment);
  }
  return it->second;
}

std::vector<SimulatedEnvironment> Simulator::states() const {
  std::shared_lock lock(state_mutex_);
  std::vector<SimulatedEnvironment> result;
  for (const auto& [id, state] : environments_) {
    result.push_back(state);
  }
  return result;
}

void Simulator::hold_dropped(const std::string& environment) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(options_.scale *
                                                          options_.drop_hold_seconds));
  std::unique_lock lock(hold_mutex_);
  hold_cv_.wait_until(lock, deadline,
                      [&] { return shutting_down_ || state(environment).reachable; });
}

void Simulator::shutdown() {
  {
    std::lock_guard lock(hold_mutex_);
    shutting_down_ = true;
  }
  hold_cv_.notify_all();
}

void Simulator::set_reachability_listener(ReachabilityListener listener) {
  std::lock_guard lock(listener_mutex_);
  listener_ = std::move(listener);
}

// ---------------------------------------------------------------------------
// SimulatorServer

struct SimulatorServer::Impl {
  Impl(Simulator& owner, std::map<std::string, HostPort> environment_binds, HostPort admin)
      : simulator(owner), binds(std::move(environment_binds)), admin_bind(std::move(admin)) {}

  Simulator& simulator;
  std::map<std::string, HostPort> binds;
  HostPort admin_bind;
  std::map<std::string, std::unique_ptr<detail::HttpListener>> listeners;
  detail::HttpListener admin;
  std::mutex mutex;

  void start_environment(const std::string& id);
  void on_reachability(const SimulatedEnvironment& state);
  void configure_admin();
};

void SimulatorServer::Impl::start_environment(const std::string& id) {
  auto& listener = *listeners.at(id);
  auto& server = listener.reset();
  server.Post(R"(/function/([A-Za-z0-9_.\-]+))",
              [this, id](const httplib::Request& req, httplib::Response& res) {
                const auto function = req.matches[1].str();
                json payload;
                if (!req.body.empty()) {
                  payload = json::parse(req.body, nullptr, false);
                }
                try {
                  const auto body = simulator.serve(id, function, payload);
                  res.set_content(body.dump(), "application/json");
                } catch (const EnvironmentUnreachable& error) {
                  if (error.mode() == UnreachableMode::drop) {
                    simulator.hold_dropped(id);
                  }
                  // Reached only after the caller has given up or the
                  // listener is being torn down.
                  res.status = 503;
                } catch (const NotFound& error) {
                  res.status = 404;
                  res.set_content(json{{"status", "error"}, {"message", error.what()}}.dump(),
                                  "application/json");
                }
              });
  server.Get("/health", [id](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "success"}, {"swarm", id}}.dump(), "application/json");
  });
  const auto bind = binds.at(id);
  const int port = listener.start(bind.host, bind.port);
  // Restarts after a refusal must come back on the same port.
  binds[id].port = port;
}

void SimulatorServer::Impl::on_reachability(const SimulatedEnvironment& state) {
  std::lock_guard lock(mutex);
  auto& listener = *listeners.at(state.id);
  const bool refuse = !state.reachable && state.unreachable_mode == UnreachableMode::refuse;
  if (refuse && listener.running()) {
    listener.stop();
  } else if (!refuse && !listener.running()) {
    start_environment(state.id);
  }
}

void SimulatorServer::Impl::configure_admin() {
  auto& server = admin.reset();
  server.Post("/admin/inject", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body, nullptr, false);
    try {
      if (body.is_discarded() || !body.is_object()) {
        throw std::invalid_argument("body must be a JSON object");
      }
      std::optional<UnreachableMode> mode;
      if (body.contains("mode")) {
        mode = parse_unreachable_mode(body["mode"].get<std::string>());
      }
      const auto env = body.at("env").get<std::string>();
      simulator.inject(env, parse_fault(body.at("fault").get<std::string>()),
                       body.at("value"), mode);
      const auto state = simulator.state(env);
      res.set_content(ordered_json{{"status", "success"},
                                   {"env", env},
                                   {"reachable", state.reachable},
                                   {"mode", to_string(state.unreachable_mode)},
                                   {"latency_ms", state.base_latency_ms},
                                   {"bandwidth_penalty_ms", state.bandwidth_penalty_ms}}
                          .dump(),
                      "application/json");
    } catch (const std::exception& error) {
      res.status = 400;
      res.set_content(json{{"status", "error"}, {"message", error.what()}}.dump(),
                      "application/json");
    }
  });
  server.Get("/admin/state", [this](const httplib::Request&, httplib::Response& res) {
    auto environments = ordered_json::array();
    for (const auto& state : simulator.states()) {
      environments.push_back(ordered_json{{"env", state.id},
                                          {"kind", to_string(state.kind)},
                                          {"reachable", state.reachable},
                                          {"mode", to_string(state.unreachable_mode)},
                                          {"latency_ms", state.base_latency_ms},
                                          {"bandwidth_penalty_ms", state.bandwidth_penalty_ms}});
    }
    res.set_content(ordered_json{{"status", "success"}, {"environments", environments}}.dump(),
                    "application/json");
  });
}

SimulatorServer::SimulatorServer(Simulator& simulator,
                                 std::map<std::string, HostPort> environment_binds,
                                 HostPort admin_bind)
    : impl_(std::make_unique<Impl>(simulator, std::move(environment_binds),
                                   std::move(admin_bind))) {
  for (const auto& [id, bind] : impl_->binds) {
    impl_->listeners.emplace(id, std::make_unique<detail::HttpListener>());
  }
}

SimulatorServer::~SimulatorServer() { stop(); }

void SimulatorServer::start() {
  std::lock_guard lock(impl_->mutex);
  for (const auto& [id, bind] : impl_->binds) {
    const auto state = impl_->simulator.state(id);
    if (state.reachable || state.unreachable_mode == UnreachableMode::drop) {
      impl_->start_environment(id);
    }
  }
  impl_->configure_admin();
  impl_->admin_bind.port = impl_->admin.start(impl_->admin_bind.host, impl_->admin_bind.port);
  impl_->simulator.set_reachability_listener(
      [impl = impl_.get()](const SimulatedEnvironment& state) { impl->on_reachability(state); });
}

void SimulatorServer::stop() {
  impl_->simulator.set_reachability_listener(nullptr);
  impl_->simulator.shutdown();
  impl_->admin.stop();
  std::lock_guard lock(impl_->mutex);
  for (auto& [id, listener] : impl_->listeners) {
    listener->stop();
  }
}

int SimulatorServer::port(const std::string& environment) const {
  return impl_->binds.at(environment).port;
}

int SimulatorServer::admin_port() const { return impl_->admin_bind.port; }

std::string SimulatorServer::address(const std::string& environment) const {
  const auto& bind = impl_->binds.at(environment);
  return "http://" + bind.host + ":" + std::to_string(bind.port);
}

std::string SimulatorServer::admin_address() const {
  return "http://" + impl_->admin_bind.host + ":" + std::to_string(impl_->admin_bind.port);
}

} // namespace fogroute::sim
