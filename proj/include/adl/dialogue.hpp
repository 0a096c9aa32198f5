// include/adl/dialogue.hpp
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adl/anomaly.hpp"
#include "adl/types.hpp"

namespace adl {

enum class DialogueState : std::uint8_t {
  Init = 0,
  ExplainActivityEvents,
  ExplainAbnormalEvents,
  FollowUpStoreRequest,
  FollowUpPromptToConfirm,
};

inline constexpr std::array<DialogueState, 5> kDialogueStates = {
    DialogueState::Init, DialogueState::ExplainActivityEvents, DialogueState::ExplainAbnormalEvents,
    DialogueState::FollowUpStoreRequest, DialogueState::FollowUpPromptToConfirm};

std::string_view to_string(DialogueState s);  // "Init", "Explain.ActivityEvents", ...

enum class Role : std::uint8_t { Caregiver, OlderAdult };
enum class Speaker : std::uint8_t { System, Caregiver, OlderAdult };

std::string_view to_string(Role r);     // "caregiver", "older_adult"
std::string_view to_string(Speaker s);  // "system", "caregiver", "older_adult"
std::optional<Role> parse_role(std::string_view text);

// ---------------------------------------------------------------------------
// Intents
// ---------------------------------------------------------------------------

namespace intent {
inline constexpr std::string_view kGreet = "greet";
inline constexpr std::string_view kExplainActivity = "explain_activity";
inline constexpr std::string_view kExplainAbnormal = "explain_abnormal";
inline constexpr std::string_view kRequestFollowup = "request_followup";
inline constexpr std::string_view kConfirmYes = "confirm_yes";
inline constexpr std::string_view kConfirmNo = "confirm_no";
inline constexpr std::string_view kDeclineShare = "decline_share";
inline constexpr std::string_view kUnknown = "unknown";
}  // namespace intent

struct Intent {
  std::string name;
  std::vector<std::string> keywords;  // lower case
};

struct IntentSet {
  std::vector<Intent> intents;

  // Every named intent present with >= 5 keywords; keyword sets disjoint.
  void validate() const;

  static IntentSet defaults();
  static IntentSet from_json(const nlohmann::json& doc);
  static IntentSet load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

// Intent with the most keyword hits; no hits or a tie yields "unknown".
std::string classify_intent(std::string_view utterance, const IntentSet& intents);

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

struct ActivityPhrases {
  std::string past;        // "took a rest"         (@what)
  std::string gerund;      // "taking a rest"       (@doing)
  std::string participle;  // "taken a rest"        (after "should have")
  std::string location;    // "living room"         (@where)
  std::string noun;        // "a toilet"            (abnormal-event context)
};

// Verb table, feature adjectives and response templates. Placeholders are
// @user @what @doing @where @when @expected @prev_doing @request @question
// @abnormal_noun.
struct Phrasebook {
  std::array<ActivityPhrases, kNumLabels> activities;
  std::map<std::string, std::string> templates;

  const ActivityPhrases& phrases(ActivityLabel label) const { return activities[index_of(label)]; }
  const std::string& tmpl(const std::string& key) const;

  static Phrasebook defaults();
  static Phrasebook from_json(const nlohmann::json& doc);
  static Phrasebook load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// "@user @what @where @when" -> "Mike took a rest in the living room at 8:30".
std::string render_activity_event(const Phrasebook& book, std::string_view user,
                                  ActivityLabel activity, std::string_view location,
                                  Timestamp time);
std::string render_activity_event(std::string_view user, ActivityLabel activity,
                                  std::string_view location, Timestamp time);

// One sentence per flagged feature (transition, duration, frequency, start
// hour) followed by the prediction sentence.
std::string render_abnormal_event(const Phrasebook& book, std::string_view user,
                                  ActivityLabel activity, const AnomalyVerdict& verdict,
                                  const ContextFeatures& features);
std::string render_abnormal_event(std::string_view user, ActivityLabel activity,
                                  const AnomalyVerdict& verdict, const ContextFeatures& features);

// "check if she has a dietary problem" -> "she has a dietary problem".
std::string extract_request(std::string_view utterance);
// "she has a dietary problem" -> "you have any dietary problem".
std::string to_second_person(std::string_view clause, std::string_view subject_name = {});

// ---------------------------------------------------------------------------
// Follow-up requests
// ---------------------------------------------------------------------------

enum class RequestStatus : std::uint8_t { Stored, Prompted, Answered, Declined };
std::string_view to_string(RequestStatus s);

struct PendingRequest {
  int id = 0;
  std::string target_user;
  std::string question_text;  // caregiver's clause, e.g. "she has a dietary problem"
  Timestamp created_at = 0;
  RequestStatus status = RequestStatus::Stored;
  std::string caregiver_session;
};

// Shared between sessions; status moves only stored -> prompted ->
// answered | declined.
class RequestStore {
 public:
  int create(std::string target_user, std::string question, Timestamp now,
             std::string caregiver_session);
  void mark_prompted(int id);
  void mark_answered(int id);
  void mark_declined(int id);
  std::optional<PendingRequest> get(int id) const;
  std::optional<PendingRequest> next_stored(const std::string& target_user) const;
  std::vector<PendingRequest> list() const;

 private:
  void transition(int id, RequestStatus from, RequestStatus to);

  mutable std::mutex mu_;
  std::vector<PendingRequest> requests_;
};

// ---------------------------------------------------------------------------
// Sessions and the state machine
// ---------------------------------------------------------------------------

struct DialogueMessage {
  Speaker speaker = Speaker::System;
  std::string text;
  Timestamp timestamp = 0;
  std::string session_id;

  bool operator==(const DialogueMessage&) const = default;
};

nlohmann::json to_json(const DialogueMessage& m);
void write_transcript_jsonl(std::ostream& out, const std::vector<DialogueMessage>& messages);

struct AbnormalContext {
  ActivityLabel activity = ActivityLabel::IdleUnlabeled;
  AnomalyVerdict verdict;
  ContextFeatures features;
  Timestamp when = 0;
  std::vector<std::string> explanations;  // detector traces
};

struct UserUtterance {
  std::string text;
};
struct AbnormalEvent {
  AbnormalContext context;
};
struct ActivityCompletion {
  ActivityLabel activity = ActivityLabel::IdleUnlabeled;
  Timestamp when = 0;
  std::string location;  // empty: the activity's usual room
};
using DialogueEvent = std::variant<UserUtterance, AbnormalEvent, ActivityCompletion>;

struct SideEffect {
  enum class Kind : std::uint8_t { RequestStored, RequestPrompted, RequestAnswered, RequestDeclined };
  Kind kind = Kind::RequestStored;
  int request_id = 0;
  std::string answer;  // only for RequestAnswered
};
std::string_view to_string(SideEffect::Kind k);

struct Session {
  std::string id;
  Role role = Role::Caregiver;
  std::string user_name;
  DialogueState state = DialogueState::Init;
  std::vector<DialogueMessage> transcript;
  std::optional<int> active_request;  // prompted, awaiting an answer
};

struct StepResult {
  std::string session_id;
  DialogueState state = DialogueState::Init;
  std::vector<DialogueMessage> messages;  // includes messages forwarded to other sessions
  std::vector<SideEffect> effects;
};

// Template dialogue manager. One engine per household; sessions belong to a
// caregiver or to the monitored older adult (`subject_name`). Not
// thread-safe apart from the request store; callers serialize steps.
class DialogueEngine {
 public:
  DialogueEngine(IntentSet intents, Phrasebook phrases, std::string subject_name);

  StepResult open_session(Role role, std::string user_name, Timestamp now);
  StepResult step(const std::string& session_id, const DialogueEvent& event, Timestamp now);

  // Delivers a monitoring event to every session in creation order.
  std::vector<StepResult> broadcast(const DialogueEvent& event, Timestamp now);

  bool has_session(const std::string& id) const;
  const Session& session(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  const RequestStore& requests() const { return requests_; }
  const std::string& subject_name() const { return subject_; }
  const IntentSet& intents() const { return intents_; }
  const Phrasebook& phrases() const { return phrases_; }

 private:
  Session& mutable_session(const std::string& id);
  void emit(StepResult& r, const std::string& session_id, std::string text, Timestamp now);
  void on_utterance(Session& s, const std::string& text, StepResult& r, Timestamp now);
  void on_abnormal(Session& s, const AbnormalContext& ctx, StepResult& r, Timestamp now);
  void on_completion(Session& s, const ActivityCompletion& ev, StepResult& r, Timestamp now);
  std::string reprompt() const;

  IntentSet intents_;
  Phrasebook phrases_;
  std::string subject_;
  std::map<std::string, Session> sessions_;
  std::vector<std::string> order_;
  int next_session_ = 1;
  RequestStore requests_;
  std::optional<ActivityCompletion> latest_activity_;
  std::optional<AbnormalContext> latest_abnormal_;
};

}  // namespace adl
