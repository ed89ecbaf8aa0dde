#include "fogroute/config.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace fogroute {

using nlohmann::json;

std::string_view to_string(EnvironmentKind kind) {
  return kind == EnvironmentKind::local ? "local" : "cloud";
}

EnvironmentKind parse_environment_kind(std::string_view name) {
  if (name == "local") {
    return EnvironmentKind::local;
  }
  if (name == "cloud") {
    return EnvironmentKind::cloud;
  }
  throw std::invalid_argument("unknown environment kind: " + std::string(name));
}

const EnvironmentDescriptor* Config::find_environment(const std::string& id) const {
  const auto it = std::find_if(environments.begin(), environments.end(),
                               [&](const auto& env) { return env.id == id; });
  return it == environments.end() ? nullptr : &*it;
}

const EnvironmentDescriptor& Config::environment(const std::string& id) const {
  if (const auto* env = find_environment(id)) {
    return *env;
  }
  throw std::invalid_argument("unknown environment: " + id);
}

const FunctionSpec* Config::find_function(const std::string& name) const {
  const auto it = std::find_if(functions.begin(), functions.end(),
                               [&](const auto& fn) { return fn.name == name; });
  return it == functions.end() ? nullptr : &*it;
}

const EnvironmentDescriptor& Config::local_environment() const {
  const auto it = std::find_if(environments.begin(), environments.end(),
                               [](const auto& env) { return env.kind == EnvironmentKind::local; });
  if (it == environments.end()) {
    throw std::logic_error("configuration has no local environment");
  }
  return *it;
}

std::vector<std::string> Config::environment_ids() const {
  std::vector<std::string> ids;
  ids.reserve(environments.size());
  for (const auto& env : environments) {
    ids.push_back(env.id);
  }
  return ids;
}

void Config::validate() const {
  std::set<std::string> ids;
  std::size_t locals = 0;
  for (const auto& env : environments) {
    if (env.id.empty()) {
      throw std::invalid_argument("environment id must not be empty");
    }
    if (!ids.insert(env.id).second) {
      throw std::invalid_argument("duplicate environment id: " + env.id);
    }
    if (env.kind == EnvironmentKind::local) {
      ++locals;
    }
    if (!(env.request_timeout > 0.0)) {
      throw std::invalid_argument("request timeout must be positive for " + env.id);
    }
    if (env.latency_ms < 0.0) {
      throw std::invalid_argument("latency must be non-negative for " + env.id);
    }
  }
  if (locals != 1) {
    throw std::invalid_argument("exactly one environment must be local");
  }
  const auto& local_id = local_environment().id;

  std::set<std::string> names;
  for (const auto& fn : functions) {
    if (!names.insert(fn.name).second) {
      throw std::invalid_argument("duplicate function: " + fn.name);
    }
    if (fn.registered_environments.empty()) {
      throw std::invalid_argument("function " + fn.name + " has no environments");
    }
    for (const auto& id : fn.registered_environments) {
      if (!ids.contains(id)) {
        throw std::invalid_argument("function " + fn.name + " names unknown environment " + id);
      }
    }
    if (fn.cloud_only && fn.registered_environments.contains(local_id)) {
      throw std::invalid_argument("cloud-only function " + fn.name + " registered locally");
    }
    if (fn.cloud_only && fn.local_service_time) {
      throw std::invalid_argument("cloud-only function " + fn.name + " has a local service time");
    }
    if (fn.pinned_environment && !fn.registered_environments.contains(*fn.pinned_environment)) {
      throw std::invalid_argument("pinned environment of " + fn.name + " is not registered");
    }
    if (fn.cloud_service_time < 0.0 || fn.local_service_time.value_or(0.0) < 0.0) {
      throw std::invalid_argument("service times must be non-negative for " + fn.name);
    }
  }
  if (defaults.epsilon < 0.0 || defaults.epsilon > 1.0) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (!(defaults.c > 0.0) || !(defaults.exploration_unit_ms > 0.0)) {
    throw std::invalid_argument("c and exploration unit must be positive");
  }
  if (!(simulator.scale > 0.0)) {
    throw std::invalid_argument("simulator scale must be positive");
  }
}

Config config_from_json(const json& document) {
  Config config;
  for (const auto& item : document.at("environments")) {
    EnvironmentDescriptor env;
    env.id = item.at("id").get<std::string>();
    env.kind = parse_environment_kind(item.at("kind").get<std::string>());
    env.base_address = item.value("address", std::string{});
    env.request_timeout =
        item.value("timeout", env.kind == EnvironmentKind::local ? 30.0 : 3.0);
    env.latency_ms = item.value("latency_ms", 0.0);
    config.environments.push_back(std::move(env));
  }

  for (const auto& item : document.at("functions")) {
    FunctionSpec fn;
    fn.name = item.at("name").get<std::string>();
    fn.cloud_only = item.value("cloud_only", false);
    if (item.contains("pinned_environment") && !item["pinned_environment"].is_null()) {
      fn.pinned_environment = item["pinned_environment"].get<std::string>();
    }
    if (item.contains("local_time") && !item["local_time"].is_null()) {
      fn.local_service_time = item["local_time"].get<double>();
    }
    fn.cloud_service_time = item.value("cloud_time", 0.0);
    if (item.contains("environments")) {
      for (const auto& id : item["environments"]) {
        fn.registered_environments.insert(id.get<std::string>());
      }
    } else {
      for (const auto& env : config.environments) {
        if (!(fn.cloud_only && env.kind == EnvironmentKind::local)) {
          fn.registered_environments.insert(env.id);
        }
      }
    }
    config.functions.push_back(std::move(fn));
  }

  if (document.contains("defaults")) {
    const auto& d = document["defaults"];
    config.defaults.algorithm =
        bandit::parse_algorithm(d.value("algorithm", std::string{"ucb1"}));
    config.defaults.epsilon = d.value("epsilon", config.defaults.epsilon);
    config.defaults.c = d.value("c", config.defaults.c);
    config.defaults.exploration_unit_ms =
        d.value("exploration_unit_ms", config.defaults.exploration_unit_ms);
  }
  if (document.contains("simulator")) {
    const auto& s = document["simulator"];
    auto& sim = config.simulator;
    sim.admin_address = s.value("admin", sim.admin_address);
    sim.scale = s.value("scale", sim.scale);
    sim.jitter_ms = s.value("jitter_ms", sim.jitter_ms);
    sim.jitter = s.value("jitter", sim.jitter);
    sim.bandwidth_penalty_ms = s.value("bandwidth_penalty_ms", sim.bandwidth_penalty_ms);
    sim.drop_hold_seconds = s.value("drop_hold_seconds", sim.drop_hold_seconds);
    sim.seed = s.value("seed", sim.seed);
  }
  config.log_path = document.value("log_path", config.log_path.string());
  config.proxy_address = document.value("proxy", config.proxy_address);
  config.seed = document.value("seed", config.seed);
  config.validate();
  return config;
}

json config_to_json(const Config& config) {
  json document;
  document["environments"] = json::array();
  for (const auto& env : config.environments) {
    document["environments"].push_back({{"id", env.id},
                                        {"kind", to_string(env.kind)},
                                        {"address", env.base_address},
                                        {"timeout", env.request_timeout},
                                        {"latency_ms", env.latency_ms}});
  }
  document["functions"] = json::array();
  for (const auto& fn : config.functions) {
    json item{{"name", fn.name},
              {"cloud_only", fn.cloud_only},
              {"cloud_time", fn.cloud_service_time},
              {"environments", fn.registered_environments}};
    item["pinned_environment"] =
        fn.pinned_environment ? json(*fn.pinned_environment) : json(nullptr);
    item["local_time"] = fn.local_service_time ? json(*fn.local_service_time) : json(nullptr);
    document["functions"].push_back(std::move(item));
  }
  document["defaults"] = {{"algorithm", to_string(config.defaults.algorithm)},
                          {"epsilon", config.defaults.epsilon},
                          {"c", config.defaults.c},
                          {"exploration_unit_ms", config.defaults.exploration_unit_ms}};
  const auto& sim = config.simulator;
  document["simulator"] = {{"admin", sim.admin_address},
                           {"scale", sim.scale},
                           {"jitter_ms", sim.jitter_ms},
                           {"jitter", sim.jitter},
                           {"bandwidth_penalty_ms", sim.bandwidth_penalty_ms},
                           {"drop_hold_seconds", sim.drop_hold_seconds},
                           {"seed", sim.seed}};
  document["log_path"] = config.log_path.string();
  document["proxy"] = config.proxy_address;
  document["seed"] = config.seed;
  return document;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open configuration " + path.string());
  }
  return config_from_json(json::parse(in));
}

Config default_config() {
  const json document = {
      {"environments",
       {{{"id", "londonServer"}, {"kind", "cloud"}, {"address", "http://127.0.0.1:8102"},
         {"timeout", 3.0}, {"latency_ms", 71.153}},
        {{"id", "frankfurtServer"}, {"kind", "cloud"}, {"address", "http://127.0.0.1:8103"},
         {"timeout", 3.0}, {"latency_ms", 52.297}},
        {{"id", "local"}, {"kind", "local"}, {"address", "http://127.0.0.1:8101"},
         {"timeout", 30.0}, {"latency_ms", 0.0}}}},
      {"functions",
       {{{"name", "func_light"}, {"local_time", 0.0}, {"cloud_time", 0.0}},
        {{"name", "func_heavy"}, {"local_time", 2.0}, {"cloud_time", 1.0}},
        {{"name", "func_super_heavy"}, {"local_time", 4.0}, {"cloud_time", 2.0}},
        {{"name", "func_obese_heavy"}, {"cloud_only", true},
         {"pinned_environment", "londonServer"}, {"cloud_time", 2.5}}}},
  };
  return config_from_json(document);
}

HostPort parse_host_port(std::string_view address) {
  if (const auto scheme = address.find("://"); scheme != std::string_view::npos) {
    address.remove_prefix(scheme + 3);
  }
  if (const auto slash = address.find('/'); slash != std::string_view::npos) {
    address = address.substr(0, slash);
  }
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("address lacks a port: " + std::string(address));
  }
  HostPort result;
  result.host = std::string(address.substr(0, colon));
  try {
    result.port = std::stoi(std::string(address.substr(colon + 1)));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in address: " + std::string(address));
  }
  return result;
}

} // namespace fogroute
