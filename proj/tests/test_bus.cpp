#include <doctest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "adl/bus.hpp"
#include "support.hpp"

using namespace adl;
using nlohmann::json;

namespace {

json answered(int id) { return {{"id", id}, {"status", "answered"}}; }

json message(const std::string& text) {
  return {{"speaker", "system"}, {"text", text}, {"timestamp", "2011-11-28 08:30:00"}, {"session_id", "s1"}};
}

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("topic names") {
  for (auto t : kTopics) CHECK(topic_from_string(to_string(t)) == t);
  CHECK(to_string(Topic::AbnormalDetected) == "abnormal_detected");
  CHECK(code_of([] { topic_from_string("weather"); }) == "invalid_argument");
}

TEST_CASE("payloads are checked against their topic") {
  CHECK_NOTHROW(validate_payload(Topic::RequestAnswered, answered(1)));
  CHECK(code_of([] { validate_payload(Topic::RequestAnswered, {{"id", 1}}); }) == "schema");
  CHECK(code_of([] { validate_payload(Topic::RequestAnswered, {{"id", "1"}, {"status", "x"}}); }) == "schema");
  CHECK(code_of([] { validate_payload(Topic::RequestAnswered, {{"id", 1}, {"status", "x"}, {"answer", "no"}}); }) ==
        "schema");
  CHECK(code_of([] { validate_payload(Topic::DialogueMessage, json::array()); }) == "schema");
  CHECK_NOTHROW(validate_payload(Topic::DialogueMessage, message("hi")));

  EventBus bus;
  CHECK(code_of([&] { bus.publish(Topic::RequestAnswered, {{"id", 1}}, 0); }) == "schema");
  CHECK(bus.size() == 0);
}

TEST_CASE("sequence numbers are per topic") {
  EventBus bus;
  CHECK(bus.publish(Topic::RequestAnswered, answered(1), 10) == 0);
  CHECK(bus.publish(Topic::DialogueMessage, message("a"), 11) == 0);
  CHECK(bus.publish(Topic::RequestAnswered, answered(2), 12) == 1);
  CHECK(bus.next_seq(Topic::RequestAnswered) == 2);
  CHECK(bus.next_seq(Topic::TimeSlice) == 0);
  CHECK(bus.size() == 3);
  const auto all = bus.all();
  REQUIRE(all.size() == 3);
  CHECK(all[0].topic == Topic::RequestAnswered);
  CHECK(all[1].topic == Topic::DialogueMessage);
  CHECK(all[2].payload["id"] == 2);
  CHECK(bus.get(Topic::RequestAnswered, 1)->ts == 12);
  CHECK_FALSE(bus.get(Topic::RequestAnswered, 2).has_value());
  CHECK(bus_event_from_json(to_json(all[2])) == all[2]);
}

TEST_CASE("subscriptions start anywhere and never drop") {
  EventBus bus(BusOptions{8});
  for (int i = 0; i < 20; ++i) bus.publish(Topic::RequestAnswered, answered(i), i);
  auto from0 = bus.subscribe(Topic::RequestAnswered);
  auto from5 = bus.subscribe("request_answered", 5);
  CHECK(from0.lag() == 20);
  CHECK(from0.lagging());
  CHECK(from5.lag() == 15);
  CHECK(from5.lagging());
  for (int i = 0; i < 20; ++i) {
    const auto e = from0.try_next();
    REQUIRE(e);
    CHECK(e->payload["id"] == i);
  }
  CHECK_FALSE(from0.try_next().has_value());
  CHECK_FALSE(from0.lagging());
  const auto batch = from5.poll(100);
  REQUIRE(batch.size() == 15);
  CHECK(batch.front().seq == 5);
  CHECK(from5.cursor() == 20);
  CHECK(code_of([&] { bus.subscribe("nope"); }) == "invalid_argument");
}

TEST_CASE("blocking reads wake on publish") {
  EventBus bus;
  auto sub = bus.subscribe(Topic::DialogueMessage);
  CHECK_FALSE(sub.next(std::chrono::milliseconds(20)).has_value());
  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    bus.publish(Topic::DialogueMessage, message("late"), 1);
  });
  const auto e = sub.next(std::chrono::seconds(5));
  writer.join();
  REQUIRE(e);
  CHECK(e->payload["text"] == "late");
}

TEST_CASE("concurrent publishers keep per-topic order") {
  EventBus bus;
  std::vector<std::thread> threads;
  for (int k = 0; k < 4; ++k) {
    threads.emplace_back([&bus, k] {
      for (int i = 0; i < 500; ++i) bus.publish(k % 2 ? Topic::RequestAnswered : Topic::DialogueMessage,
                                                k % 2 ? answered(i) : message(std::to_string(i)), i);
    });
  }
  std::atomic<std::size_t> seen{0};
  std::thread reader([&] {
    auto sub = bus.subscribe(Topic::RequestAnswered);
    std::uint64_t expect = 0;
    while (expect < 1000) {
      auto e = sub.next(std::chrono::seconds(5));
      if (!e) break;
      CHECK(e->seq == expect++);
      ++seen;
    }
  });
  for (auto& t : threads) t.join();
  reader.join();
  CHECK(seen == 1000);
  CHECK(bus.size() == 2000);
}

TEST_CASE("persistent log survives a reopen") {
  test::TempDir dir;
  {
    EventBus bus(dir.path());
    for (int i = 0; i < 50; ++i) {
      bus.publish(Topic::RequestAnswered, answered(i), i);
      bus.publish(Topic::DialogueMessage, message("m" + std::to_string(i)), i);
    }
  }
  EventBus bus(dir.path());
  CHECK(bus.persistent());
  CHECK(bus.size() == 100);
  CHECK(bus.next_seq(Topic::RequestAnswered) == 50);
  CHECK(bus.publish(Topic::RequestAnswered, answered(50), 50) == 50);
  bus.flush();

  const auto replay = replay_log(dir / "events.log");
  CHECK_FALSE(replay.truncated_tail);
  CHECK(replay.events.size() == 101);
  CHECK(replay.events == bus.all());
  CHECK(replay.valid_bytes == std::filesystem::file_size(dir / "events.log"));

  const auto bounds = record_boundaries(dir / "events.log");
  CHECK(bounds.size() == 102);
  CHECK(bounds.front() == 12);

  std::ifstream idx(dir / "topics.idx");
  const json doc = json::parse(idx);
  CHECK(doc["version"] == kLogVersion);
  CHECK(doc["log_bytes"] == bounds.back());
  CHECK(doc["topics"]["request_answered"]["next_seq"] == 51);
  CHECK(doc["topics"]["request_answered"]["last_offset"] == bounds[bounds.size() - 2]);
  CHECK(doc["topics"]["dialogue_message"]["last_offset"] == bounds[bounds.size() - 3]);

  const std::string bytes = slurp(dir / "events.log");
  CHECK(bytes.substr(0, 8) == "ADLMLOG\n");
}

TEST_CASE("torn and corrupt tails are dropped") {
  test::TempDir dir;
  {
    EventBus bus(dir.path());
    for (int i = 0; i < 10; ++i) bus.publish(Topic::RequestAnswered, answered(i), i);
  }
  const auto path = dir / "events.log";
  const auto bounds = record_boundaries(path);
  const std::string full = slurp(path);

  SUBCASE("cut mid-record") {
    std::filesystem::resize_file(path, bounds[7] + 5);
    const auto r = replay_log(path);
    CHECK(r.truncated_tail);
    CHECK(r.events.size() == 7);
    EventBus bus(dir.path());
    CHECK(bus.size() == 7);
    CHECK(std::filesystem::file_size(path) == bounds[7]);
    CHECK(bus.publish(Topic::RequestAnswered, answered(7), 7) == 7);
  }
  SUBCASE("flipped byte") {
    std::string bad = full;
    bad[bounds[4] + 12] ^= 0x20;
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bad;
    const auto r = replay_log(path);
    CHECK(r.truncated_tail);
    CHECK(r.events.size() == 4);
  }
  SUBCASE("foreign file") {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << "hello world, not a log";
    CHECK(code_of([&] { replay_log(path); }) == "version");
  }
}
