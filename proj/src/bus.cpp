#include "adl/bus.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>

namespace adl {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'D', 'L', 'M', 'L', 'O', 'G', '\n'};
constexpr std::size_t kHeaderBytes = sizeof kMagic + 4;
constexpr std::uint32_t kMaxRecord = 64u << 20;

enum class Kind { Int, Number, String, Array, Object, Bool, StringOrNull };

struct Field {
  const char* name;
  Kind kind;
};

const std::vector<Field>& schema(Topic t) {
  static const std::array<std::vector<Field>, kNumTopics> schemas = {{
      // time_slice
      {{"day", Kind::String}, {"t", Kind::Int}, {"wallclock", Kind::String}, {"x", Kind::Array}},
      // activity_recognized
      {{"day", Kind::String}, {"t", Kind::Int}, {"wallclock", Kind::String}, {"activity", Kind::String}},
      // segment_completed
      {{"day", Kind::String},
       {"activity", Kind::String},
       {"prev_activity", Kind::StringOrNull},
       {"start_slice", Kind::Int},
       {"end_slice", Kind::Int},
       {"wallclock", Kind::String},
       {"features", Kind::Object}},
      // abnormal_detected
      {{"day", Kind::String},
       {"activity", Kind::String},
       {"start_slice", Kind::Int},
       {"end_slice", Kind::Int},
       {"wallclock", Kind::String},
       {"flags", Kind::Array},
       {"directions", Kind::Object},
       {"features", Kind::Object},
       {"expected_next", Kind::String},
       {"explanations", Kind::Array}},
      // notification
      {{"activity", Kind::String},
       {"flags", Kind::Array},
       {"wallclock", Kind::String},
       {"severity", Kind::Int},
       {"style", Kind::String},
       {"abnormal_seq", Kind::Int}},
      // dialogue_message
      {{"speaker", Kind::String}, {"text", Kind::String}, {"timestamp", Kind::String}, {"session_id", Kind::String}},
      // request_stored
      {{"id", Kind::Int},
       {"target_user", Kind::String},
       {"question_text", Kind::String},
       {"created_at", Kind::String},
       {"status", Kind::String}},
      // request_answered
      {{"id", Kind::Int}, {"status", Kind::String}},
  }};
  return schemas[index_of(t)];
}

bool matches(Kind k, const json& v) {
  switch (k) {
    case Kind::Int: return v.is_number_integer();
    case Kind::Number: return v.is_number();
    case Kind::String: return v.is_string();
    case Kind::Array: return v.is_array();
    case Kind::Object: return v.is_object();
    case Kind::Bool: return v.is_boolean();
    case Kind::StringOrNull: return v.is_string() || v.is_null();
  }
  return false;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t crc(const std::string& body) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
}

std::string header_bytes() {
  std::string h(kMagic, sizeof kMagic);
  put_u32(h, kLogVersion);
  return h;
}

struct RawRecord {
  std::uint64_t offset;
  std::string body;
};

// Intact records in file order plus the byte count they cover.
std::pair<std::vector<RawRecord>, std::uint64_t> scan(const std::filesystem::path& path, bool& torn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  torn = false;
  if (data.size() < kHeaderBytes || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw Error("version", "'" + path.string() + "' is not an event log");
  }
  const auto version = get_u32(reinterpret_cast<const unsigned char*>(data.data()) + sizeof kMagic);
  if (version != kLogVersion) {
    throw Error("version", "event log version " + std::to_string(version) + " is not supported");
  }
  std::vector<RawRecord> out;
  std::uint64_t pos = kHeaderBytes;
  while (pos < data.size()) {
    if (data.size() - pos < 8) {
      torn = true;
      break;
    }
    const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos);
    const std::uint32_t len = get_u32(p);
    const std::uint32_t sum = get_u32(p + 4);
    if (len > kMaxRecord || data.size() - pos - 8 < len) {
      torn = true;
      break;
    }
    std::string body = data.substr(pos + 8, len);
    if (crc(body) != sum) {
      torn = true;
      break;
    }
    out.push_back({pos, std::move(body)});
    pos += 8 + len;
  }
  return {std::move(out), pos};
}

}  // namespace

std::string_view to_string(Topic t) {
  switch (t) {
    case Topic::TimeSlice: return "time_slice";
    case Topic::ActivityRecognized: return "activity_recognized";
    case Topic::SegmentCompleted: return "segment_completed";
    case Topic::AbnormalDetected: return "abnormal_detected";
    case Topic::Notification: return "notification";
    case Topic::DialogueMessage: return "dialogue_message";
    case Topic::RequestStored: return "request_stored";
    case Topic::RequestAnswered: return "request_answered";
  }
  return "?";
}

Topic topic_from_string(std::string_view name) {
  for (auto t : kTopics) {
    if (to_string(t) == name) return t;
  }
  throw Error("invalid_argument", "unknown topic '" + std::string(name) + "'");
}

json to_json(const BusEvent& e) {
  return {{"topic", to_string(e.topic)}, {"seq", e.seq}, {"ts", e.ts}, {"payload", e.payload}};
}

BusEvent bus_event_from_json(const json& j) {
  try {
    BusEvent e;
    e.topic = topic_from_string(j.at("topic").get<std::string>());
    e.seq = j.at("seq").get<std::uint64_t>();
    e.ts = j.at("ts").get<Timestamp>();
    e.payload = j.at("payload");
    return e;
  } catch (const json::exception& ex) {
    throw Error("parse", std::string("bus event: ") + ex.what());
  }
}

void validate_payload(Topic topic, const json& payload) {
  const std::string name(to_string(topic));
  if (!payload.is_object()) throw Error("schema", name + " payload must be an object");
  const auto& fields = schema(topic);
  for (const auto& f : fields) {
    auto it = payload.find(f.name);
    if (it == payload.end()) throw Error("schema", name + " payload lacks '" + f.name + "'");
    if (!matches(f.kind, *it)) throw Error("schema", name + " payload field '" + f.name + "' has the wrong type");
  }
  for (const auto& [key, _] : payload.items()) {
    const bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return key == f.name; });
    if (!known) throw Error("schema", name + " payload has unexpected field '" + key + "'");
  }
}

LogReplay replay_log(const std::filesystem::path& path) {
  bool torn = false;
  auto [records, end] = scan(path, torn);
  LogReplay r;
  r.valid_bytes = kHeaderBytes;
  std::array<std::uint64_t, kNumTopics> next{};
  for (const auto& rec : records) {
    BusEvent e;
    try {
      e = bus_event_from_json(json::parse(rec.body));
      validate_payload(e.topic, e.payload);
    } catch (const std::exception&) {
      torn = true;
      break;
    }
    if (e.seq != next[index_of(e.topic)]) {
      torn = true;
      break;
    }
    ++next[index_of(e.topic)];
    r.valid_bytes = rec.offset + 8 + rec.body.size();
    r.offsets.push_back(rec.offset);
    r.events.push_back(std::move(e));
  }
  r.truncated_tail = torn;
  return r;
}

std::vector<std::uint64_t> record_boundaries(const std::filesystem::path& path) {
  bool torn = false;
  auto [records, end] = scan(path, torn);
  std::vector<std::uint64_t> out;
  out.push_back(kHeaderBytes);
  for (const auto& rec : records) out.push_back(rec.offset + 8 + rec.body.size());
  return out;
}

// ---------------------------------------------------------------------------

Subscription::Subscription(const EventBus* bus, Topic topic, std::uint64_t from)
    : bus_(bus), topic_(topic), cursor_(from) {}

std::optional<BusEvent> Subscription::try_next() {
  auto e = bus_->get(topic_, cursor_);
  if (e) ++cursor_;
  return e;
}

std::optional<BusEvent> Subscription::next(std::chrono::milliseconds timeout) {
  if (!bus_->wait(topic_, cursor_, timeout)) return std::nullopt;
  return try_next();
}

std::vector<BusEvent> Subscription::poll(std::size_t max) {
  auto out = bus_->read(topic_, cursor_, max);
  cursor_ += out.size();
  return out;
}

std::uint64_t Subscription::lag() const {
  const auto end = bus_->next_seq(topic_);
  return end > cursor_ ? end - cursor_ : 0;
}

bool Subscription::lagging() const { return lag() > bus_->options().subscriber_capacity; }

// ---------------------------------------------------------------------------

EventBus::EventBus(BusOptions options) : options_(options) {}

EventBus::EventBus(const std::filesystem::path& dir, BusOptions options) : options_(options), dir_(dir) {
  std::filesystem::create_directories(dir_);
  const auto path = dir_ / "events.log";
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    auto replay = replay_log(path);
    if (replay.truncated_tail) std::filesystem::resize_file(path, replay.valid_bytes);
    for (std::size_t i = 0; i < replay.events.size(); ++i) {
      auto& e = replay.events[i];
      last_offset_[index_of(e.topic)] = replay.offsets[i];
      order_.emplace_back(e.topic, e.seq);
      topics_[index_of(e.topic)].push_back(std::move(e));
    }
    log_bytes_ = replay.valid_bytes;
    log_ = std::fopen(path.string().c_str(), "ab");
  } else {
    log_ = std::fopen(path.string().c_str(), "wb");
    if (log_) {
      const auto h = header_bytes();
      std::fwrite(h.data(), 1, h.size(), log_);
      std::fflush(log_);
      log_bytes_ = h.size();
    }
  }
  if (!log_) throw Error("io", "cannot open '" + path.string() + "' for writing");
  write_index();
}

EventBus::~EventBus() {
  if (log_) {
    std::fflush(log_);
    try {
      write_index();
    } catch (...) {
    }
    std::fclose(log_);
  }
}

void EventBus::append_record(const BusEvent& e) {
  const std::string body = to_json(e).dump();
  std::string rec;
  put_u32(rec, static_cast<std::uint32_t>(body.size()));
  put_u32(rec, crc(body));
  rec += body;
  if (std::fwrite(rec.data(), 1, rec.size(), log_) != rec.size() || std::fflush(log_) != 0) {
    throw Error("io", "append to event log failed");
  }
  last_offset_[index_of(e.topic)] = log_bytes_;
  log_bytes_ += rec.size();
}

void EventBus::write_index() const {
  json topics = json::object();
  for (auto t : kTopics) {
    topics[std::string(to_string(t))] = {{"next_seq", topics_[index_of(t)].size()},
                                         {"last_offset", last_offset_[index_of(t)]}};
  }
  const json doc = {{"version", kLogVersion}, {"log_bytes", log_bytes_}, {"topics", topics}};
  const auto tmp = dir_ / "topics.idx.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("io", "cannot write '" + tmp.string() + "'");
    out << doc.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, dir_ / "topics.idx");
}

std::uint64_t EventBus::publish(Topic topic, json payload, Timestamp ts) {
  validate_payload(topic, payload);
  std::uint64_t seq;
  {
    std::lock_guard lock(mu_);
    auto& log = topics_[index_of(topic)];
    seq = log.size();
    BusEvent e{topic, seq, ts, std::move(payload)};
    if (log_) append_record(e);
    log.push_back(std::move(e));
    order_.emplace_back(topic, seq);
  }
  cv_.notify_all();
  return seq;
}

Subscription EventBus::subscribe(Topic topic, std::uint64_t from_seq) const {
  return Subscription(this, topic, from_seq);
}

Subscription EventBus::subscribe(std::string_view topic, std::uint64_t from_seq) const {
  return subscribe(topic_from_string(topic), from_seq);
}

std::vector<BusEvent> EventBus::read(Topic topic, std::uint64_t from, std::size_t max) const {
  std::lock_guard lock(mu_);
  const auto& log = topics_[index_of(topic)];
  std::vector<BusEvent> out;
  for (std::uint64_t i = from; i < log.size() && out.size() < max; ++i) out.push_back(log[i]);
  return out;
}

std::optional<BusEvent> EventBus::get(Topic topic, std::uint64_t seq) const {
  std::lock_guard lock(mu_);
  const auto& log = topics_[index_of(topic)];
  if (seq >= log.size()) return std::nullopt;
  return log[seq];
}

bool EventBus::wait(Topic topic, std::uint64_t seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return topics_[index_of(topic)].size() > seq; });
}

std::uint64_t EventBus::next_seq(Topic topic) const {
  std::lock_guard lock(mu_);
  return topics_[index_of(topic)].size();
}

std::size_t EventBus::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

std::vector<BusEvent> EventBus::all() const {
  std::lock_guard lock(mu_);
  std::vector<BusEvent> out;
  out.reserve(order_.size());
  for (const auto& [t, seq] : order_) out.push_back(topics_[index_of(t)][seq]);
  return out;
}

void EventBus::flush() {
  std::lock_guard lock(mu_);
  if (!log_) return;
  std::fflush(log_);
  write_index();
}

}  // namespace adl
