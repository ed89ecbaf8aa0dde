#include "fogroute/proxy.hpp"

#include "http_listener.hpp"

#include <spdlog/spdlog.h>

namespace fogroute::proxy {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(ordered_json{{"status", "error"}, {"message", message}}.dump(),
                  "application/json");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) {
      out += ',';
    }
    out += item;
  }
  return out;
}

std::optional<double> query_double(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) {
    return std::nullopt;
  }
  try {
    return std::stod(req.get_param_value(key));
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad numeric parameter: ") + key);
  }
}

// Maps request-level exceptions onto status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const UnknownFunction& error) {
    send_error(res, 404, error.what());
  } catch (const std::invalid_argument& error) {
    send_error(res, 400, error.what());
  } catch (const std::exception& error) {
    spdlog::error("request failed: {}", error.what());
    send_error(res, 500, error.what());
  }
}

} // namespace

struct ProxyServer::Impl {
  explicit Impl(ProxyService& owner) : service(owner) {}

  ProxyService& service;
  detail::HttpListener listener;

  void routes(httplib::Server& server);
};

void ProxyServer::Impl::routes(httplib::Server& server) {
  server.Post(R"(/function/([A-Za-z0-9_.\-]+))",
              [this](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                  json payload = json::object();
                  InvocationOptions options;
                  if (!req.body.empty()) {
                    const auto body = json::parse(req.body, nullptr, false);
                    if (body.is_discarded() || !body.is_object()) {
                      throw std::invalid_argument("request body must be a JSON object");
                    }
                    payload = body.value("payload", json::object());
                    options = options_from_json(body.value("options", json(nullptr)));
                  }
                  auto result = service.invoke(req.matches[1].str(), payload.dump(), options);
                  res.status = result.http_status;
                  res.set_header(header_chosen, result.chosen);
                  res.set_header(header_candidates, join(result.selection.candidates));
                  res.set_header(header_outcome, std::string(metrics::to_string(result.outcome)));
                  if (result.serving) {
                    res.set_header(header_serving, *result.serving);
                  }
                  res.set_content(std::move(result.body), "application/json");
                });
              });

  server.Get("/weight_scale", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("function")) {
        throw std::invalid_argument("missing function parameter");
      }
      InvocationOptions options;
      if (req.has_param("algorithm")) {
        options.algorithm = bandit::parse_algorithm(req.get_param_value("algorithm"));
      }
      options.epsilon = query_double(req, "epsilon");
      options.c = query_double(req, "c");
      const auto function = req.get_param_value("function");
      const auto report = service.weight_scale(function, options);
      const auto& spec = service.function_spec(function);
      res.set_content(
          weight_report_json(report, candidate_environments(service.config(), spec)).dump(),
          "application/json");
    });
  });

  server.Get("/durations", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("function") || !req.has_param("env")) {
        throw std::invalid_argument("function and env parameters are required");
      }
      auto records = ordered_json::array();
      for (const auto& record : service.store().get_duration(req.get_param_value("function"),
                                                             req.get_param_value("env"))) {
        records.push_back(metrics::to_json(record));
      }
      res.set_content(ordered_json{{"status", "success"}, {"records", records}}.dump(),
                      "application/json");
    });
  });

  server.Post("/durations", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        throw std::invalid_argument("request body must be JSON");
      }
      service.store().insert_duration(metrics::record_from_json(body));
      res.set_content(ordered_json{{"status", "success"}}.dump(), "application/json");
    });
  });

  server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(ordered_json{{"status", "success"},
                                   {"stats", metrics::to_json(service.store().get_overall_stats())}}
                          .dump(),
                      "application/json");
    });
  });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"success"})", "application/json");
  });
}

ProxyServer::ProxyServer(ProxyService& service)
    : impl_(std::make_unique<Impl>(service)) {}

ProxyServer::~ProxyServer() { stop(); }

int ProxyServer::start(const std::string& host, int port) {
  impl_->routes(impl_->listener.reset());
  return impl_->listener.start(host, port);
}

void ProxyServer::stop() { impl_->listener.stop(); }

int ProxyServer::port() const { return impl_->listener.port(); }

} // namespace fogroute::proxy
