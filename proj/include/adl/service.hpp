// include/adl/service.hpp
#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "adl/bus.hpp"
#include "adl/pipeline.hpp"

namespace adl {

// HTTP front end over a running pipeline.
//
//   GET  /health                       -> {status, model_fingerprint, anomaly_model_fingerprint, ...}
//   GET  /events?topic=T&from=N&max=M  -> {topic, from, next, events:[{topic,seq,ts,payload}]}
//   GET  /notifications?from=N&max=M   -> text/event-stream, one "notification" event per record
//   POST /sessions {role, name?}       -> 201 {session_id, role, state, messages}
//   POST /sessions/{id}/messages {text}-> {session_id, state, messages}
//   GET  /sessions/{id}/transcript     -> {session_id, role, state, messages}
//   GET  /requests  (X-Session-Id or ?session=, caregiver only) -> {requests:[...]}
//
// Errors are {"error": code, "message": text} with 404 for unknown sessions,
// 403 for role violations and 422 for malformed requests.
class Service {
 public:
  Service(Pipeline& pipeline, EventBus& bus);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds (port 0: any free port), serves on a background thread and
  // returns the bound port.
  int start(const std::string& host, int port);
  // Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

nlohmann::json to_json(const PendingRequest& r);

}  // namespace adl
