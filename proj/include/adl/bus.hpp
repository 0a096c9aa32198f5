// include/adl/bus.hpp
#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adl/types.hpp"

namespace adl {

enum class Topic : std::uint8_t {
  TimeSlice = 0,
  ActivityRecognized,
  SegmentCompleted,
  AbnormalDetected,
  Notification,
  DialogueMessage,
  RequestStored,
  RequestAnswered,
};

inline constexpr std::size_t kNumTopics = 8;
inline constexpr std::array<Topic, kNumTopics> kTopics = {
    Topic::TimeSlice,    Topic::ActivityRecognized, Topic::SegmentCompleted, Topic::AbnormalDetected,
    Topic::Notification, Topic::DialogueMessage,    Topic::RequestStored,    Topic::RequestAnswered};

constexpr std::size_t index_of(Topic t) { return static_cast<std::size_t>(t); }
std::string_view to_string(Topic t);
// Throws Error{"invalid_argument"} on an unknown name.
Topic topic_from_string(std::string_view name);

struct BusEvent {
  Topic topic = Topic::TimeSlice;
  std::uint64_t seq = 0;  // per topic, from 0
  Timestamp ts = 0;
  nlohmann::json payload;

  bool operator==(const BusEvent&) const = default;
};

nlohmann::json to_json(const BusEvent& e);
BusEvent bus_event_from_json(const nlohmann::json& j);

// Throws Error{"schema"} when the payload does not match the topic's record.
void validate_payload(Topic topic, const nlohmann::json& payload);

// Append-only record log: an 8-byte magic, a u32 version, then records of
// u32 length, u32 CRC-32 and a JSON body, all little-endian.
inline constexpr std::uint32_t kLogVersion = 1;

struct LogReplay {
  std::vector<BusEvent> events;
  std::vector<std::uint64_t> offsets;  // record start per event
  std::uint64_t valid_bytes = 0;  // end of the last intact record
  bool truncated_tail = false;
};

// Reads records until the first short, corrupt or out-of-sequence one.
LogReplay replay_log(const std::filesystem::path& path);
// Byte offset of every record boundary, header end included.
std::vector<std::uint64_t> record_boundaries(const std::filesystem::path& path);

class EventBus;

// Cursor over one topic. Never drops events: a slow reader just falls
// behind, and lagging() reports when it is further back than the capacity.
// The bus must outlive its subscriptions.
class Subscription {
 public:
  Subscription(const EventBus* bus, Topic topic, std::uint64_t from);

  std::optional<BusEvent> try_next();
  std::optional<BusEvent> next(std::chrono::milliseconds timeout);
  std::vector<BusEvent> poll(std::size_t max);

  Topic topic() const { return topic_; }
  std::uint64_t cursor() const { return cursor_; }
  std::uint64_t lag() const;
  bool lagging() const;

 private:
  const EventBus* bus_;
  Topic topic_;
  std::uint64_t cursor_;
};

struct BusOptions {
  std::size_t subscriber_capacity = 4096;  // lag at which lagging() turns true
};

class EventBus {
 public:
  explicit EventBus(BusOptions options = {});
  // Persistent bus: replays `dir`/events.log (dropping a torn tail) and
  // appends to it from then on. `dir`/topics.idx holds per-topic offsets.
  explicit EventBus(const std::filesystem::path& dir, BusOptions options = {});
  ~EventBus();
  EventBus(const EventBus&) = delete;
  EventBus& operator=(const EventBus&) = delete;

  std::uint64_t publish(Topic topic, nlohmann::json payload, Timestamp ts);

  // Throws Error{"invalid_argument"} for an unknown topic name.
  Subscription subscribe(Topic topic, std::uint64_t from_seq = 0) const;
  Subscription subscribe(std::string_view topic, std::uint64_t from_seq = 0) const;

  std::vector<BusEvent> read(Topic topic, std::uint64_t from, std::size_t max) const;
  std::optional<BusEvent> get(Topic topic, std::uint64_t seq) const;
  bool wait(Topic topic, std::uint64_t seq, std::chrono::milliseconds timeout) const;

  std::uint64_t next_seq(Topic topic) const;
  std::size_t size() const;
  // Every event in publication order.
  std::vector<BusEvent> all() const;
  const BusOptions& options() const { return options_; }
  bool persistent() const { return log_ != nullptr; }

  void flush();

 private:
  void append_record(const BusEvent& e);
  void write_index() const;

  BusOptions options_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::array<std::vector<BusEvent>, kNumTopics> topics_;
  std::vector<std::pair<Topic, std::uint64_t>> order_;
  std::filesystem::path dir_;
  std::FILE* log_ = nullptr;
  std::uint64_t log_bytes_ = 0;
  std::array<std::uint64_t, kNumTopics> last_offset_{};
};

}  // namespace adl
