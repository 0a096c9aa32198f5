#include "adl/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <set>

namespace adl {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 7> kIntentNames = {
    intent::kGreet,      intent::kExplainActivity, intent::kExplainAbnormal, intent::kRequestFollowup,
    intent::kConfirmYes, intent::kConfirmNo,       intent::kDeclineShare};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

json read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse", "'" + path.string() + "': " + e.what());
  }
}

// Substitutes @name placeholders. Unknown names and empty values are errors.
std::string fill(const std::string& tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] != '@') {
      out += tmpl[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
    const std::string name = tmpl.substr(i + 1, j - i - 1);
    auto it = slots.find(name);
    if (it == slots.end()) throw Error("template", "unknown slot @" + name + " in \"" + tmpl + "\"");
    if (it->second.empty()) throw Error("invalid_argument", "slot @" + name + " is empty");
    out += it->second;
    i = j;
  }
  return out;
}

std::set<std::string> slot_names(const std::string& tmpl) {
  std::set<std::string> out;
  for (std::size_t i = tmpl.find('@'); i != std::string::npos; i = tmpl.find('@', i + 1)) {
    std::size_t j = i + 1;
    while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_')) ++j;
    out.insert(tmpl.substr(i + 1, j - i - 1));
  }
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string strip_punct(std::string_view w) {
  std::string out;
  for (char c : w) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') out += c;
  }
  return lower(out);
}

}  // namespace

std::string_view to_string(DialogueState s) {
  switch (s) {
    case DialogueState::Init: return "Init";
    case DialogueState::ExplainActivityEvents: return "Explain.ActivityEvents";
    case DialogueState::ExplainAbnormalEvents: return "Explain.AbnormalEvents";
    case DialogueState::FollowUpStoreRequest: return "FollowUp.StoreRequest";
    case DialogueState::FollowUpPromptToConfirm: return "FollowUp.PromptToConfirm";
  }
  return "?";
}

std::string_view to_string(Role r) { return r == Role::Caregiver ? "caregiver" : "older_adult"; }

std::string_view to_string(Speaker s) {
  switch (s) {
    case Speaker::System: return "system";
    case Speaker::Caregiver: return "caregiver";
    case Speaker::OlderAdult: return "older_adult";
  }
  return "?";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "caregiver") return Role::Caregiver;
  if (text == "older_adult") return Role::OlderAdult;
  return std::nullopt;
}

std::string_view to_string(RequestStatus s) {
  switch (s) {
    case RequestStatus::Stored: return "stored";
    case RequestStatus::Prompted: return "prompted";
    case RequestStatus::Answered: return "answered";
    case RequestStatus::Declined: return "declined";
  }
  return "?";
}

std::string_view to_string(SideEffect::Kind k) {
  switch (k) {
    case SideEffect::Kind::RequestStored: return "request_stored";
    case SideEffect::Kind::RequestPrompted: return "request_prompted";
    case SideEffect::Kind::RequestAnswered: return "request_answered";
    case SideEffect::Kind::RequestDeclined: return "request_declined";
  }
  return "?";
}

// ---------------------------------------------------------------------------

void IntentSet::validate() const {
  std::map<std::string, std::string> owner;
  for (auto name : kIntentNames) {
    auto it = std::find_if(intents.begin(), intents.end(),
                           [&](const Intent& i) { return i.name == name; });
    if (it == intents.end()) throw Error("config", "intent '" + std::string(name) + "' is missing");
  }
  for (const auto& i : intents) {
    if (std::find(kIntentNames.begin(), kIntentNames.end(), i.name) == kIntentNames.end()) {
      throw Error("config", "unknown intent '" + i.name + "'");
    }
    std::set<std::string> distinct(i.keywords.begin(), i.keywords.end());
    if (distinct.size() < 5) {
      throw Error("config", "intent '" + i.name + "' needs at least 5 distinct keywords");
    }
    for (const auto& k : distinct) {
      if (k.empty() || tokenize(k) != std::vector<std::string>{k}) {
        throw Error("config", "keyword '" + k + "' of intent '" + i.name + "' is not a single lower-case word");
      }
      auto [it, fresh] = owner.emplace(k, i.name);
      if (!fresh) {
        throw Error("config", "keyword '" + k + "' is shared by '" + it->second + "' and '" + i.name + "'");
      }
    }
  }
}

IntentSet IntentSet::defaults() {
  IntentSet s;
  s.intents = {
      {"greet", {"hello", "hi", "hey", "morning", "greetings", "evening"}},
      {"explain_activity", {"what", "doing", "activity", "happened", "recent", "latest"}},
      {"explain_abnormal", {"explain", "abnormal", "why", "reason", "unusual", "wrong"}},
      {"request_followup", {"check", "confirm", "ask", "verify", "inquire", "find"}},
      {"confirm_yes", {"yes", "yeah", "yep", "sure", "correct", "indeed"}},
      {"confirm_no", {"no", "nope", "nah", "not", "never", "negative"}},
      {"decline_share", {"decline", "private", "rather", "skip", "share", "prefer"}},
  };
  return s;
}

IntentSet IntentSet::from_json(const json& doc) {
  IntentSet s;
  try {
    if (doc.value("version", 0) != 1) throw Error("version", "intent config version must be 1");
    for (auto name : kIntentNames) {
      const std::string key(name);
      if (!doc.at("intents").contains(key)) continue;
      Intent i{key, {}};
      for (const auto& w : doc.at("intents").at(key)) i.keywords.push_back(w.get<std::string>());
      s.intents.push_back(std::move(i));
    }
    for (const auto& [key, _] : doc.at("intents").items()) {
      if (std::find(kIntentNames.begin(), kIntentNames.end(), key) == kIntentNames.end()) {
        throw Error("config", "unknown intent '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error("parse", std::string("intent config: ") + e.what());
  }
  s.validate();
  return s;
}

IntentSet IntentSet::load(const std::filesystem::path& path) { return from_json(read_config(path)); }

json IntentSet::to_json() const {
  json m = json::object();
  for (const auto& i : intents) m[i.name] = i.keywords;
  return {{"version", 1}, {"intents", m}};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string classify_intent(std::string_view utterance, const IntentSet& intents) {
  const auto tokens = tokenize(utterance);
  std::string best(intent::kUnknown);
  int best_hits = 0;
  bool tie = false;
  for (const auto& i : intents.intents) {
    int hits = 0;
    for (const auto& t : tokens) {
      if (std::find(i.keywords.begin(), i.keywords.end(), t) != i.keywords.end()) ++hits;
    }
    if (hits > best_hits) {
      best_hits = hits;
      best = i.name;
      tie = false;
    } else if (hits > 0 && hits == best_hits) {
      tie = true;
    }
  }
  if (best_hits == 0 || tie) return std::string(intent::kUnknown);
  return best;
}

// ---------------------------------------------------------------------------

const std::string& Phrasebook::tmpl(const std::string& key) const {
  auto it = templates.find(key);
  if (it == templates.end()) throw Error("template", "no template '" + key + "'");
  return it->second;
}

Phrasebook Phrasebook::defaults() {
  Phrasebook b;
  auto set = [&](ActivityLabel l, ActivityPhrases p) { b.activities[index_of(l)] = std::move(p); };
  set(ActivityLabel::Leaving, {"went out", "going out", "gone out", "entrance", "an outing"});
  set(ActivityLabel::Toileting, {"used the toilet", "using the toilet", "used the toilet", "bathroom", "a toilet"});
  set(ActivityLabel::Showering, {"took a shower", "taking a shower", "taken a shower", "bathroom", "a shower"});
  set(ActivityLabel::Sleeping, {"slept", "sleeping", "slept", "bedroom", "sleep"});
  set(ActivityLabel::Breakfast, {"had breakfast", "having breakfast", "had breakfast", "kitchen", "breakfast"});
  set(ActivityLabel::Dinner, {"had dinner", "having dinner", "had dinner", "kitchen", "dinner"});
  set(ActivityLabel::IdleUnlabeled, {"stayed idle", "staying idle", "stayed idle", "living room", "idling"});
  set(ActivityLabel::Lunch, {"had lunch", "having lunch", "had lunch", "kitchen", "lunch"});
  set(ActivityLabel::Snack, {"had a snack", "having a snack", "had a snack", "kitchen", "a snack"});
  set(ActivityLabel::SpareTimeTV, {"took a rest", "taking a rest", "taken a rest", "living room", "a rest"});
  set(ActivityLabel::Grooming, {"groomed", "grooming", "groomed", "bathroom", "grooming"});
  b.templates = {
      {"activity_event", "@user @what in the @where at @when"},
      {"transition", "@user started @doing unexpectedly after @prev_doing"},
      {"transition_first", "@user started the day with @doing unexpectedly"},
      {"duration_more", "@user spent much more time in @doing"},
      {"duration_less", "@user spent much less time in @doing"},
      {"frequency_more", "@user @what more often than usual"},
      {"frequency_less", "@user @what less often than usual"},
      {"start_earlier", "@user started @doing earlier than usual"},
      {"start_later", "@user started @doing later than usual"},
      {"prediction", "@user should have @expected instead of @doing"},
      {"greeting", "Hello @user, how can I help you?"},
      {"reprompt", "Sorry, I did not understand. You can ask me what happened or why something was abnormal."},
      {"no_activity", "No activity has been recognized yet"},
      {"no_abnormal", "No abnormal event has been detected yet"},
      {"abnormal_notice", "Abnormal event: @user @what at @when"},
      {"store_request", "I will confirm whether @request"},
      {"prompt", "I was wondering if @question?"},
      {"prompt_with_context", "I found you have an abnormal event of @abnormal_noun. I was wondering if @question?"},
      {"no_pending", "There is no question waiting for your answer"},
      {"answer_ack", "Thank you, I will pass your answer on"},
      {"decline_ack", "Understood, I will keep that private"},
      {"answer_forward", "@user answered whether @request: @answer"},
      {"decline_forward", "@user declined to share."},
  };
  return b;
}

Phrasebook Phrasebook::from_json(const json& doc) {
  Phrasebook b = defaults();
  try {
    if (doc.value("version", 0) != 1) throw Error("version", "phrase config version must be 1");
    if (doc.contains("activities")) {
      for (const auto& [name, p] : doc.at("activities").items()) {
        ActivityPhrases& dst = b.activities[index_of(label_from_string(name))];
        dst.past = p.value("past", dst.past);
        dst.gerund = p.value("gerund", dst.gerund);
        dst.participle = p.value("participle", dst.participle);
        dst.location = p.value("location", dst.location);
        dst.noun = p.value("noun", dst.noun);
      }
    }
    if (doc.contains("templates")) {
      for (const auto& [key, t] : doc.at("templates").items()) {
        if (!b.templates.count(key)) throw Error("config", "unknown template '" + key + "'");
        // An override may use only the slots its default is rendered with.
        const auto allowed = slot_names(b.templates[key]);
        for (const auto& name : slot_names(t.get<std::string>())) {
          if (!allowed.count(name)) throw Error("config", "template '" + key + "' has unknown slot @" + name);
        }
        b.templates[key] = t.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw Error("parse", std::string("phrase config: ") + e.what());
  }
  for (auto l : kAllLabels) {
    const auto& p = b.phrases(l);
    if (p.past.empty() || p.gerund.empty() || p.participle.empty() || p.location.empty() || p.noun.empty()) {
      throw Error("config", "incomplete phrases for " + std::string(to_string(l)));
    }
  }
  return b;
}

Phrasebook Phrasebook::load(const std::filesystem::path& path) { return from_json(read_config(path)); }

json Phrasebook::to_json() const {
  json acts = json::object();
  for (auto l : kAllLabels) {
    const auto& p = phrases(l);
    acts[std::string(to_string(l))] = {{"past", p.past},
                                       {"gerund", p.gerund},
                                       {"participle", p.participle},
                                       {"location", p.location},
                                       {"noun", p.noun}};
  }
  return {{"version", 1}, {"activities", acts}, {"templates", templates}};
}

std::string render_activity_event(const Phrasebook& book, std::string_view user,
                                  ActivityLabel activity, std::string_view location,
                                  Timestamp time) {
  return fill(book.tmpl("activity_event"), {{"user", std::string(user)},
                                            {"what", book.phrases(activity).past},
                                            {"where", std::string(location)},
                                            {"when", format_clock(time)}});
}

std::string render_activity_event(std::string_view user, ActivityLabel activity,
                                  std::string_view location, Timestamp time) {
  static const Phrasebook book = Phrasebook::defaults();
  return render_activity_event(book, user, activity, location, time);
}

std::string render_abnormal_event(const Phrasebook& book, std::string_view user,
                                  ActivityLabel activity, const AnomalyVerdict& verdict,
                                  const ContextFeatures& features) {
  if (!verdict.any) throw Error("invalid_argument", "verdict carries no abnormal feature");
  const auto& p = book.phrases(activity);
  std::map<std::string, std::string> slots = {
      {"user", std::string(user)},
      {"what", p.past},
      {"doing", p.gerund},
      {"expected", book.phrases(verdict.expected_next).participle},
      {"prev_doing", features.prev_label ? book.phrases(*features.prev_label).gerund : p.gerund}};

  std::vector<std::string> sentences;
  for (auto f : kFeatures) {
    if (!verdict.flag(f)) continue;
    const bool up = verdict.direction[index_of(f)] > 0;
    std::string key;
    switch (f) {
      case Feature::Transition: key = features.prev_label ? "transition" : "transition_first"; break;
      case Feature::Duration: key = up ? "duration_more" : "duration_less"; break;
      case Feature::Frequency: key = up ? "frequency_more" : "frequency_less"; break;
      case Feature::StartHour: key = up ? "start_later" : "start_earlier"; break;
    }
    sentences.push_back(fill(book.tmpl(key), slots));
  }
  sentences.push_back(fill(book.tmpl("prediction"), slots));
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += ". ";
    out += sentences[i];
  }
  return out;
}

std::string render_abnormal_event(std::string_view user, ActivityLabel activity,
                                  const AnomalyVerdict& verdict, const ContextFeatures& features) {
  static const Phrasebook book = Phrasebook::defaults();
  return render_abnormal_event(book, user, activity, verdict, features);
}

std::string extract_request(std::string_view utterance) {
  const auto words = split_words(utterance);
  std::size_t start = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto w = strip_punct(words[i]);
    if (w == "if" || w == "whether") {
      start = i + 1;
      break;
    }
  }
  std::string out;
  for (std::size_t i = start; i < words.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += words[i];
  }
  while (!out.empty() && std::string_view("?.!,;").find(out.back()) != std::string_view::npos) out.pop_back();
  return trim(out);
}

std::string to_second_person(std::string_view clause, std::string_view subject_name) {
  static const std::map<std::string, std::string> verbs = {
      {"has", "have"},   {"is", "are"},       {"was", "were"},       {"does", "do"},
      {"hasn't", "haven't"}, {"isn't", "aren't"}, {"wasn't", "weren't"}, {"doesn't", "don't"}};
  static const std::set<std::string> pronouns = {"he", "she", "they", "him", "her"};

  auto words = split_words(clause);
  if (words.empty()) return {};
  const auto first = strip_punct(words[0]);
  if (!pronouns.count(first) && (subject_name.empty() || first != lower(subject_name))) {
    return trim(clause);
  }
  words[0] = "you";
  if (words.size() > 1) {
    const auto v = lower(words[1]);
    if (auto it = verbs.find(v); it != verbs.end()) {
      words[1] = it->second;
      if ((v == "has" || v == "hasn't") && words.size() > 2) {
        const auto art = lower(words[2]);
        if (art == "a" || art == "an") words[2] = "any";
      }
    }
  }
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto w = lower(words[i]);
    if (w == "his" || w == "her" || w == "their") words[i] = "your";
  }
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// ---------------------------------------------------------------------------

int RequestStore::create(std::string target_user, std::string question, Timestamp now,
                         std::string caregiver_session) {
  std::lock_guard lock(mu_);
  PendingRequest r;
  r.id = static_cast<int>(requests_.size()) + 1;
  r.target_user = std::move(target_user);
  r.question_text = std::move(question);
  r.created_at = now;
  r.caregiver_session = std::move(caregiver_session);
  requests_.push_back(std::move(r));
  return requests_.back().id;
}

void RequestStore::transition(int id, RequestStatus from, RequestStatus to) {
  std::lock_guard lock(mu_);
  if (id < 1 || id > static_cast<int>(requests_.size())) {
    throw Error("not_found", "no request " + std::to_string(id));
  }
  auto& r = requests_[static_cast<std::size_t>(id - 1)];
  if (r.status != from) {
    throw Error("state", "request " + std::to_string(id) + " is " + std::string(to_string(r.status)) +
                             ", cannot become " + std::string(to_string(to)));
  }
  r.status = to;
}

void RequestStore::mark_prompted(int id) { transition(id, RequestStatus::Stored, RequestStatus::Prompted); }
void RequestStore::mark_answered(int id) { transition(id, RequestStatus::Prompted, RequestStatus::Answered); }
void RequestStore::mark_declined(int id) { transition(id, RequestStatus::Prompted, RequestStatus::Declined); }

std::optional<PendingRequest> RequestStore::get(int id) const {
  std::lock_guard lock(mu_);
  if (id < 1 || id > static_cast<int>(requests_.size())) return std::nullopt;
  return requests_[static_cast<std::size_t>(id - 1)];
}

std::optional<PendingRequest> RequestStore::next_stored(const std::string& target_user) const {
  std::lock_guard lock(mu_);
  for (const auto& r : requests_) {
    if (r.status == RequestStatus::Stored && r.target_user == target_user) return r;
  }
  return std::nullopt;
}

std::vector<PendingRequest> RequestStore::list() const {
  std::lock_guard lock(mu_);
  return requests_;
}

// ---------------------------------------------------------------------------

json to_json(const DialogueMessage& m) {
  return {{"speaker", to_string(m.speaker)},
          {"text", m.text},
          {"timestamp", format_timestamp(m.timestamp)},
          {"session_id", m.session_id}};
}

void write_transcript_jsonl(std::ostream& out, const std::vector<DialogueMessage>& messages) {
  for (const auto& m : messages) out << to_json(m).dump() << '\n';
}

DialogueEngine::DialogueEngine(IntentSet intents, Phrasebook phrases, std::string subject_name)
    : intents_(std::move(intents)), phrases_(std::move(phrases)), subject_(std::move(subject_name)) {
  intents_.validate();
  if (subject_.empty()) throw Error("invalid_argument", "the monitored person needs a name");
}

bool DialogueEngine::has_session(const std::string& id) const { return sessions_.count(id) > 0; }

const Session& DialogueEngine::session(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error("not_found", "unknown session '" + id + "'");
  return it->second;
}

Session& DialogueEngine::mutable_session(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error("not_found", "unknown session '" + id + "'");
  return it->second;
}

std::vector<std::string> DialogueEngine::session_ids() const { return order_; }

void DialogueEngine::emit(StepResult& r, const std::string& session_id, std::string text, Timestamp now) {
  DialogueMessage m{Speaker::System, std::move(text), now, session_id};
  mutable_session(session_id).transcript.push_back(m);
  r.messages.push_back(std::move(m));
}

std::string DialogueEngine::reprompt() const { return phrases_.tmpl("reprompt"); }

StepResult DialogueEngine::open_session(Role role, std::string user_name, Timestamp now) {
  if (user_name.empty()) user_name = role == Role::OlderAdult ? subject_ : "caregiver";
  Session s;
  s.id = "s" + std::to_string(next_session_++);
  s.role = role;
  s.user_name = std::move(user_name);
  const std::string id = s.id;
  sessions_.emplace(id, std::move(s));
  order_.push_back(id);

  StepResult r;
  r.session_id = id;
  emit(r, id, fill(phrases_.tmpl("greeting"), {{"user", sessions_.at(id).user_name}}), now);
  r.state = DialogueState::Init;
  return r;
}

StepResult DialogueEngine::step(const std::string& session_id, const DialogueEvent& event, Timestamp now) {
  Session& s = mutable_session(session_id);
  StepResult r;
  r.session_id = session_id;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, UserUtterance>) {
          on_utterance(s, ev.text, r, now);
        } else if constexpr (std::is_same_v<T, AbnormalEvent>) {
          on_abnormal(s, ev.context, r, now);
        } else {
          on_completion(s, ev, r, now);
        }
      },
      event);
  r.state = s.state;
  return r;
}

std::vector<StepResult> DialogueEngine::broadcast(const DialogueEvent& event, Timestamp now) {
  std::vector<StepResult> out;
  // Global context is recorded even when no session is open.
  if (const auto* a = std::get_if<AbnormalEvent>(&event)) latest_abnormal_ = a->context;
  if (const auto* c = std::get_if<ActivityCompletion>(&event)) latest_activity_ = *c;
  for (const auto& id : order_) out.push_back(step(id, event, now));
  return out;
}

void DialogueEngine::on_utterance(Session& s, const std::string& text, StepResult& r, Timestamp now) {
  const Speaker who = s.role == Role::Caregiver ? Speaker::Caregiver : Speaker::OlderAdult;
  if (!trim(text).empty()) s.transcript.push_back({who, text, now, s.id});

  const std::string name = classify_intent(text, intents_);
  if (name == intent::kGreet) {
    s.state = DialogueState::Init;
    emit(r, s.id, fill(phrases_.tmpl("greeting"), {{"user", s.user_name}}), now);
  } else if (name == intent::kExplainActivity) {
    s.state = DialogueState::ExplainActivityEvents;
    if (latest_activity_) {
      const auto& a = *latest_activity_;
      const std::string where = a.location.empty() ? phrases_.phrases(a.activity).location : a.location;
      emit(r, s.id, render_activity_event(phrases_, subject_, a.activity, where, a.when), now);
    } else {
      emit(r, s.id, phrases_.tmpl("no_activity"), now);
    }
  } else if (name == intent::kExplainAbnormal) {
    s.state = DialogueState::ExplainAbnormalEvents;
    if (latest_abnormal_) {
      const auto& a = *latest_abnormal_;
      emit(r, s.id, render_abnormal_event(phrases_, subject_, a.activity, a.verdict, a.features), now);
      for (const auto& trace : a.explanations) emit(r, s.id, trace, now);
    } else {
      emit(r, s.id, phrases_.tmpl("no_abnormal"), now);
    }
  } else if (name == intent::kRequestFollowup && s.role == Role::Caregiver) {
    const std::string clause = extract_request(text);
    if (clause.empty()) {
      emit(r, s.id, reprompt(), now);
      return;
    }
    s.state = DialogueState::FollowUpStoreRequest;
    const int id = requests_.create(subject_, clause, now, s.id);
    r.effects.push_back({SideEffect::Kind::RequestStored, id, {}});
    emit(r, s.id, fill(phrases_.tmpl("store_request"), {{"request", clause}}), now);
  } else if ((name == intent::kConfirmYes || name == intent::kConfirmNo ||
              name == intent::kDeclineShare) &&
             s.role == Role::OlderAdult) {
    if (!s.active_request) {
      emit(r, s.id, phrases_.tmpl("no_pending"), now);
      return;
    }
    const int id = *s.active_request;
    const auto req = requests_.get(id);
    s.active_request.reset();
    s.state = DialogueState::Init;
    const bool declined = name == intent::kDeclineShare;
    if (declined) {
      requests_.mark_declined(id);
      r.effects.push_back({SideEffect::Kind::RequestDeclined, id, {}});
      emit(r, s.id, phrases_.tmpl("decline_ack"), now);
    } else {
      requests_.mark_answered(id);
      r.effects.push_back({SideEffect::Kind::RequestAnswered, id, text});
      emit(r, s.id, phrases_.tmpl("answer_ack"), now);
    }
    if (req && has_session(req->caregiver_session)) {
      // The withheld answer never leaves this branch.
      const std::string forward =
          declined ? fill(phrases_.tmpl("decline_forward"), {{"user", s.user_name}})
                   : fill(phrases_.tmpl("answer_forward"),
                          {{"user", s.user_name}, {"request", req->question_text}, {"answer", text}});
      emit(r, req->caregiver_session, forward, now);
    }
  } else {
    emit(r, s.id, reprompt(), now);
  }
}

void DialogueEngine::on_abnormal(Session& s, const AbnormalContext& ctx, StepResult& r, Timestamp now) {
  latest_abnormal_ = ctx;
  if (s.role != Role::Caregiver) return;
  emit(r, s.id,
       fill(phrases_.tmpl("abnormal_notice"),
            {{"user", subject_}, {"what", phrases_.phrases(ctx.activity).past}, {"when", format_clock(ctx.when)}}),
       now);
}

void DialogueEngine::on_completion(Session& s, const ActivityCompletion& ev, StepResult& r, Timestamp now) {
  latest_activity_ = ev;
  if (s.role != Role::OlderAdult || s.active_request) return;
  if (ev.activity != ActivityLabel::SpareTimeTV && ev.activity != ActivityLabel::IdleUnlabeled) return;
  const auto req = requests_.next_stored(subject_);
  if (!req) return;

  requests_.mark_prompted(req->id);
  s.active_request = req->id;
  s.state = DialogueState::FollowUpPromptToConfirm;
  r.effects.push_back({SideEffect::Kind::RequestPrompted, req->id, {}});
  const std::string question = to_second_person(req->question_text, subject_);
  if (latest_abnormal_) {
    emit(r, s.id,
         fill(phrases_.tmpl("prompt_with_context"),
              {{"abnormal_noun", phrases_.phrases(latest_abnormal_->activity).noun}, {"question", question}}),
         now);
  } else {
    emit(r, s.id, fill(phrases_.tmpl("prompt"), {{"question", question}}), now);
  }
}

}  // namespace adl
