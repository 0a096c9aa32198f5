#include "adl/service.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <thread>

namespace adl {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, {{"error", code}, {"message", message}});
}

std::optional<std::uint64_t> parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

json messages_json(const std::vector<DialogueMessage>& msgs) {
  json out = json::array();
  for (const auto& m : msgs) out.push_back(to_json(m));
  return out;
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) {
      fail(res, 422, "schema", "request body must be a JSON object");
      return std::nullopt;
    }
    return body;
  } catch (const json::exception&) {
    fail(res, 422, "schema", "request body is not valid JSON");
    return std::nullopt;
  }
}

}  // namespace

json to_json(const PendingRequest& r) {
  return {{"id", r.id},
          {"target_user", r.target_user},
          {"question_text", r.question_text},
          {"created_at", format_timestamp(r.created_at)},
          {"status", to_string(r.status)},
          {"caregiver_session", r.caregiver_session}};
}

struct Service::Impl {
  Pipeline& pipeline;
  EventBus& bus;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  Impl(Pipeline& p, EventBus& b) : pipeline(p), bus(b) { routes(); }

  void routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      const auto st = pipeline.stats();
      reply(res, 200,
            {{"status", "ok"},
             {"artifact_version", kArtifactVersion},
             {"model_fingerprint", pipeline.model().fingerprint},
             {"anomaly_model_fingerprint", pipeline.artifacts().model_fingerprint},
             {"anomaly_seed", pipeline.artifacts().seed},
             {"events", bus.size()},
             {"slices", st.slices},
             {"abnormal", st.abnormal},
             {"sim_time", format_timestamp(pipeline.now())}});
    });

    server.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("topic")) return fail(res, 422, "schema", "missing 'topic' parameter");
      Topic topic;
      try {
        topic = topic_from_string(req.get_param_value("topic"));
      } catch (const Error& e) {
        return fail(res, 422, "schema", e.what());
      }
      std::uint64_t from = 0;
      std::uint64_t max = 1000;
      if (req.has_param("from")) {
        auto v = parse_uint(req.get_param_value("from"));
        if (!v) return fail(res, 422, "schema", "'from' must be a non-negative integer");
        from = *v;
      }
      if (req.has_param("max")) {
        auto v = parse_uint(req.get_param_value("max"));
        if (!v || *v == 0 || *v > 10000) return fail(res, 422, "schema", "'max' must be in 1..10000");
        max = *v;
      }
      json events = json::array();
      const auto batch = bus.read(topic, from, static_cast<std::size_t>(max));
      for (const auto& e : batch) events.push_back(to_json(e));
      reply(res, 200,
            {{"topic", to_string(topic)}, {"from", from}, {"next", from + batch.size()}, {"events", events}});
    });

    server.Get("/notifications", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t from = bus.next_seq(Topic::Notification);
      std::uint64_t max = 0;  // unlimited
      if (req.has_header("Last-Event-ID")) {
        auto v = parse_uint(req.get_header_value("Last-Event-ID"));
        if (!v) return fail(res, 422, "schema", "Last-Event-ID must be a sequence number");
        from = *v + 1;
      }
      if (req.has_param("from")) {
        auto v = parse_uint(req.get_param_value("from"));
        if (!v) return fail(res, 422, "schema", "'from' must be a non-negative integer");
        from = *v;
      }
      if (req.has_param("max")) {
        auto v = parse_uint(req.get_param_value("max"));
        if (!v) return fail(res, 422, "schema", "'max' must be a non-negative integer");
        max = *v;
      }
      auto sub = std::make_shared<Subscription>(bus.subscribe(Topic::Notification, from));
      auto sent = std::make_shared<std::uint64_t>(0);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, sub, sent, max](std::size_t, httplib::DataSink& sink) {
            while (!stopping) {
              if (max && *sent >= max) {
                sink.done();
                return true;
              }
              auto e = sub->next(std::chrono::milliseconds(200));
              if (!e) {
                if (!sink.is_writable()) return false;
                continue;
              }
              const std::string frame = "id: " + std::to_string(e->seq) + "\nevent: notification\ndata: " +
                                        to_json(*e).dump() + "\n\n";
              if (!sink.write(frame.data(), frame.size())) return false;
              ++*sent;
              return true;
            }
            sink.done();
            return true;
          });
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req, res);
      if (!body) return;
      if (!body->contains("role") || !(*body)["role"].is_string()) {
        return fail(res, 422, "schema", "'role' must be \"caregiver\" or \"older_adult\"");
      }
      auto role = parse_role((*body)["role"].get<std::string>());
      if (!role) return fail(res, 422, "schema", "'role' must be \"caregiver\" or \"older_adult\"");
      std::string name;
      if (body->contains("name")) {
        if (!(*body)["name"].is_string()) return fail(res, 422, "schema", "'name' must be a string");
        name = (*body)["name"].get<std::string>();
      }
      if (!pipeline.has_dialogue()) return fail(res, 422, "schema", "dialogue is disabled");
      const auto r = pipeline.open_session(*role, name);
      reply(res, 201,
            {{"session_id", r.session_id},
             {"role", to_string(*role)},
             {"state", to_string(r.state)},
             {"messages", messages_json(r.messages)}});
    });

    server.Post(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id)) return fail(res, 404, "not_found", "unknown session '" + id + "'");
      auto body = parse_body(req, res);
      if (!body) return;
      if (!body->contains("text") || !(*body)["text"].is_string()) {
        return fail(res, 422, "schema", "'text' must be a string");
      }
      const std::string text = (*body)["text"].get<std::string>();
      if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        return fail(res, 422, "schema", "'text' must not be empty");
      }
      const auto r = pipeline.converse(id, text);
      reply(res, 200, {{"session_id", id}, {"state", to_string(r.state)}, {"messages", messages_json(r.messages)}});
    });

    server.Get(R"(/sessions/([^/]+)/transcript)", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      if (!known(id)) return fail(res, 404, "not_found", "unknown session '" + id + "'");
      const Session s = pipeline.with_dialogue([&](DialogueEngine& d) { return d.session(id); });
      reply(res, 200,
            {{"session_id", id},
             {"role", to_string(s.role)},
             {"state", to_string(s.state)},
             {"messages", messages_json(s.transcript)}});
    });

    server.Get("/requests", [this](const httplib::Request& req, httplib::Response& res) {
      std::string id = req.get_header_value("X-Session-Id");
      if (id.empty()) id = req.get_param_value("session");
      if (id.empty()) return fail(res, 422, "schema", "a caregiver session id is required");
      if (!known(id)) return fail(res, 404, "not_found", "unknown session '" + id + "'");
      const auto [role, list] = pipeline.with_dialogue([&](DialogueEngine& d) {
        return std::make_pair(d.session(id).role, d.requests().list());
      });
      if (role != Role::Caregiver) return fail(res, 403, "forbidden", "only caregivers can read the request queue");
      json out = json::array();
      for (const auto& r : list) out.push_back(to_json(r));
      reply(res, 200, {{"requests", out}});
    });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        fail(res, e.code() == "not_found" ? 404 : 422, e.code(), e.what());
      } catch (const std::exception& e) {
        fail(res, 500, "internal", e.what());
      }
    });
  }

  bool known(const std::string& id) {
    if (!pipeline.has_dialogue()) return false;
    return pipeline.with_dialogue([&](DialogueEngine& d) { return d.has_session(id); });
  }
};

Service::Service(Pipeline& pipeline, EventBus& bus) : impl_(std::make_unique<Impl>(pipeline, bus)) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error("io", "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("io", "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace adl
