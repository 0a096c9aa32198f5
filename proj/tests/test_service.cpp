#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "adl/service.hpp"
#include "support.hpp"

using namespace adl;
using nlohmann::json;

namespace {

struct Fixture {
  EventBus bus;
  DialogueEngine engine{IntentSet::defaults(), Phrasebook::defaults(), "Alice"};
  Pipeline pipeline{test::trained_household().model, test::trained_household().fit.artifacts, bus, PipelineConfig{},
                    &engine};
  Service service{pipeline, bus};
  int port = service.start("127.0.0.1", 0);
  httplib::Client client{"127.0.0.1", port};

  Fixture() { client.set_read_timeout(10, 0); }

  json post(const std::string& path, const json& body, int expect) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
  json get(const std::string& path, int expect, const httplib::Headers& h = {}) {
    auto res = client.Get(path, h);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
};

void check_error(const json& body, const std::string& code) {
  CHECK(body["error"] == code);
  CHECK(body["message"].is_string());
}

void stream_days(Pipeline& p, int days) {
  for (const auto& d : test::household(days).days)
    for (const auto& s : d.slices) p.push(s);
  p.finish();
}

}  // namespace

TEST_CASE("health") {
  Fixture f;
  const auto h = f.get("/health", 200);
  CHECK(h["status"] == "ok");
  CHECK(h["model_fingerprint"] == test::trained_household().model.fingerprint);
  CHECK(h["artifact_version"] == kArtifactVersion);
}

TEST_CASE("events endpoint") {
  Fixture f;
  stream_days(f.pipeline, 1);
  auto page = f.get("/events?topic=time_slice&from=10&max=5", 200);
  CHECK(page["topic"] == "time_slice");
  CHECK(page["from"] == 10);
  CHECK(page["next"] == 15);
  REQUIRE(page["events"].size() == 5);
  CHECK(page["events"][0]["seq"] == 10);
  CHECK(page["events"][0]["payload"]["t"] == 10);

  page = f.get("/events?topic=time_slice&from=1438", 200);
  CHECK(page["events"].size() == 2);
  CHECK(page["next"] == 1440);

  check_error(f.get("/events", 422), "schema");
  check_error(f.get("/events?topic=weather", 422), "schema");
  check_error(f.get("/events?topic=time_slice&from=-1", 422), "schema");
  check_error(f.get("/events?topic=time_slice&max=0", 422), "schema");
}

TEST_CASE("sessions and messages") {
  Fixture f;
  const auto cg = f.post("/sessions", {{"role", "caregiver"}, {"name", "Bob"}}, 201);
  CHECK(cg["session_id"] == "s1");
  CHECK(cg["state"] == "Init");
  CHECK(cg["messages"][0]["text"] == "Hello Bob, how can I help you?");
  const auto oa = f.post("/sessions", {{"role", "older_adult"}}, 201);
  CHECK(oa["session_id"] == "s2");

  auto r = f.post("/sessions/s1/messages", {{"text", "check if she has a dietary problem"}}, 200);
  CHECK(r["state"] == "FollowUp.StoreRequest");
  CHECK(r["messages"][0]["text"] == "I will confirm whether she has a dietary problem");

  auto reqs = f.get("/requests", 200, {{"X-Session-Id", "s1"}});
  REQUIRE(reqs["requests"].size() == 1);
  CHECK(reqs["requests"][0]["status"] == "stored");
  CHECK(reqs["requests"][0]["question_text"] == "she has a dietary problem");
  CHECK(f.get("/requests?session=s1", 200)["requests"].size() == 1);
  check_error(f.get("/requests", 403, {{"X-Session-Id", "s2"}}), "forbidden");
  check_error(f.get("/requests", 422), "schema");
  check_error(f.get("/requests?session=s7", 404), "not_found");

  const auto tr = f.get("/sessions/s1/transcript", 200);
  CHECK(tr["role"] == "caregiver");
  CHECK(tr["messages"].size() == 3);
  CHECK(tr["messages"][1]["speaker"] == "caregiver");

  check_error(f.post("/sessions/s9/messages", {{"text", "hello"}}, 404), "not_found");
  check_error(f.get("/sessions/s9/transcript", 404), "not_found");
  check_error(f.post("/sessions/s1/messages", {{"text", "   "}}, 422), "schema");
  check_error(f.post("/sessions/s1/messages", {{"txt", "hello"}}, 422), "schema");
  check_error(f.post("/sessions", {{"role", "admin"}}, 422), "schema");
  auto raw = f.client.Post("/sessions", "{broken", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 422);
}

TEST_CASE("decline reaches the caregiver only as a refusal") {
  Fixture f;
  f.post("/sessions", {{"role", "caregiver"}, {"name", "Bob"}}, 201);
  f.post("/sessions", {{"role", "older_adult"}}, 201);
  f.post("/sessions/s1/messages", {{"text", "check if she has a dietary problem"}}, 200);
  stream_days(f.pipeline, 1);
  const auto prompt = f.get("/sessions/s2/transcript", 200);
  CHECK(prompt["state"] == "FollowUp.PromptToConfirm");
  f.post("/sessions/s2/messages", {{"text", "I would rather not share my tummy trouble"}}, 200);
  const auto tr = f.get("/sessions/s1/transcript", 200);
  CHECK(tr["messages"].back()["text"] == "Alice declined to share.");
  CHECK(tr.dump().find("tummy") == std::string::npos);
  CHECK(f.get("/requests?session=s1", 200)["requests"][0]["status"] == "declined");
}

TEST_CASE("notification stream") {
  Fixture f;
  stream_days(f.pipeline, 2);
  const auto total = f.bus.next_seq(Topic::Notification);
  REQUIRE(total >= 2);

  std::string body;
  auto res = f.client.Get("/notifications?from=0&max=2", [&](const char* data, std::size_t n) {
    body.append(data, n);
    return true;
  });
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(body.starts_with("id: 0\nevent: notification\ndata: "));
  CHECK(body.find("id: 1\n") != std::string::npos);
  CHECK(body.find("id: 2\n") == std::string::npos);
  const auto first = body.substr(body.find("data: ") + 6, body.find("\n\n") - body.find("data: ") - 6);
  CHECK(json::parse(first)["payload"]["style"] == "highlight");

  std::string resumed;
  res = f.client.Get("/notifications?max=1", {{"Last-Event-ID", "0"}}, [&](const char* data, std::size_t n) {
    resumed.append(data, n);
    return true;
  });
  REQUIRE(res);
  CHECK(resumed.starts_with("id: 1\n"));

  // Without a cursor the stream starts at the live end and waits.
  std::string live;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", f.port);
    c.set_read_timeout(10, 0);
    c.Get("/notifications?max=1", [&](const char* data, std::size_t n) {
      live.append(data, n);
      return true;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  f.bus.publish(Topic::Notification,
                {{"activity", "Toileting"},
                 {"flags", {"frequency"}},
                 {"wallclock", "2011-11-28 10:00:00"},
                 {"severity", 1},
                 {"style", "highlight"},
                 {"abnormal_seq", 0}},
                0);
  reader.join();
  CHECK(live.starts_with("id: " + std::to_string(total) + "\n"));

  check_error(f.get("/notifications?from=x", 422), "schema");
}
