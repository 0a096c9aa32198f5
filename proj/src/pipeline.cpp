#include "adl/pipeline.hpp"

#include "adl/detectors.hpp"

namespace adl {
namespace {

using nlohmann::json;

json flag_names(const AnomalyVerdict& v) {
  json out = json::array();
  for (auto f : kFeatures) {
    if (v.flag(f)) out.push_back(std::string(to_string(f)));
  }
  return out;
}

int severity(const AnomalyVerdict& v) {
  int n = 0;
  for (bool b : v.flags) n += b ? 1 : 0;
  return n;
}

}  // namespace

json features_to_json(const ContextFeatures& f) {
  return {{"transition_prob", f.transition_prob},
          {"duration_min", f.duration_min},
          {"frequency_today", f.frequency_today},
          {"start_hour", f.start_hour}};
}

AnomalyVerdict pipeline_verdict(const ContextFeatures& features, const AnomalyArtifacts& artifacts,
                                const HmmModel& model, VerdictSource source) {
  AnomalyVerdict v = rule_label(features, artifacts.stats, model);
  if (source == VerdictSource::Rule) return v;
  const auto predicted = artifacts.detectors.predict_all(features);
  v.any = false;
  for (auto f : kFeatures) {
    const std::size_t i = index_of(f);
    v.flags[i] = predicted[i];
    if (!predicted[i]) {
      v.direction[i] = 0;
    } else if (f == Feature::Transition) {
      v.direction[i] = -1;
    } else {
      const Gaussian& g = artifacts.stats.get(features.label, f);
      v.direction[i] = features.value(f) >= g.mu ? 1 : -1;
    }
    v.any = v.any || predicted[i];
  }
  return v;
}

Pipeline::Pipeline(const HmmModel& model, const AnomalyArtifacts& artifacts, EventBus& bus,
                   PipelineConfig config, DialogueEngine* dialogue)
    : model_(model),
      artifacts_(artifacts),
      bus_(bus),
      config_(config),
      dialogue_(dialogue),
      decoder_(model_, config.lag) {
  check_compatible(model_, artifacts_);
}

void Pipeline::push(const TimeSlice& slice) {
  std::lock_guard lock(mu_);
  if (static_cast<int>(slice.x.size()) != model_.n_sensors) {
    throw Error("invalid_argument", "slice has " + std::to_string(slice.x.size()) + " sensors, model expects " +
                                        std::to_string(model_.n_sensors));
  }
  const Timestamp day = midnight_floor(slice.wallclock);
  if (day_ && day < *day_) throw Error("invalid_argument", "slices went back in time");
  if (day_ && day != *day_) flush_decoder();
  day_ = day;
  now_ = slice.wallclock;
  ++stats_.slices;

  json x = json::array();
  for (auto v : slice.x) x.push_back(static_cast<int>(v));
  bus_.publish(Topic::TimeSlice,
               {{"day", format_date(day)}, {"t", slice.t}, {"wallclock", format_timestamp(slice.wallclock)}, {"x", x}},
               slice.wallclock);
  for (const auto& [t, label] : decoder_.push(slice.x)) commit(t, label);
}

void Pipeline::end_day() {
  std::lock_guard lock(mu_);
  flush_decoder();
}

void Pipeline::flush_decoder() {
  if (!day_) return;
  for (const auto& [t, label] : decoder_.flush()) commit(t, label);
  if (open_) close_segment(last_t_ + 1);
  day_segments_.clear();
  day_.reset();
  last_t_ = -1;
}

void Pipeline::commit(int t, ActivityLabel label) {
  const Timestamp at = *day_ + t * kSliceSeconds;
  ++stats_.committed;
  bus_.publish(Topic::ActivityRecognized,
               {{"day", format_date(*day_)},
                {"t", t},
                {"wallclock", format_timestamp(at)},
                {"activity", std::string(to_string(label))}},
               at);
  if (open_ && open_->label != label) close_segment(t);
  if (!open_) open_ = OpenSegment{label, t};
  last_t_ = t;
}

void Pipeline::close_segment(int end) {
  const ActivitySegment seg{open_->label, open_->start, end, *day_};
  open_.reset();
  on_segment(seg);
}

void Pipeline::on_segment(const ActivitySegment& seg) {
  ++stats_.segments;
  day_segments_.push_back(seg);
  // Featurizing the whole day so far keeps the features identical to the
  // offline path.
  const ContextFeatures features = featurize(day_segments_, model_).back().features;
  const Timestamp start = seg.day + seg.start_slice * kSliceSeconds;
  const Timestamp end = seg.day + seg.end_slice * kSliceSeconds;
  const std::string activity(to_string(seg.label));

  bus_.publish(Topic::SegmentCompleted,
               {{"day", format_date(seg.day)},
                {"activity", activity},
                {"prev_activity", features.prev_label ? json(std::string(to_string(*features.prev_label))) : json()},
                {"start_slice", seg.start_slice},
                {"end_slice", seg.end_slice},
                {"wallclock", format_timestamp(start)},
                {"features", features_to_json(features)}},
               end);

  const AnomalyVerdict verdict = pipeline_verdict(features, artifacts_, model_, config_.verdicts);
  std::vector<std::string> explanations;
  if (verdict.any) {
    ++stats_.abnormal;
    json directions = json::object();
    for (auto f : kFeatures) {
      if (!verdict.flag(f)) continue;
      directions[std::string(to_string(f))] = verdict.direction[index_of(f)];
      explanations.push_back(std::string(to_string(f)) + " detector: " +
                             explain_tree(artifacts_.detectors, f, features).text());
    }
    const auto abnormal_seq =
        bus_.publish(Topic::AbnormalDetected,
                     {{"day", format_date(seg.day)},
                      {"activity", activity},
                      {"start_slice", seg.start_slice},
                      {"end_slice", seg.end_slice},
                      {"wallclock", format_timestamp(start)},
                      {"flags", flag_names(verdict)},
                      {"directions", directions},
                      {"features", features_to_json(features)},
                      {"expected_next", std::string(to_string(verdict.expected_next))},
                      {"explanations", explanations}},
                     end);
    bus_.publish(Topic::Notification,
                 {{"activity", activity},
                  {"flags", flag_names(verdict)},
                  {"wallclock", format_timestamp(start)},
                  {"severity", severity(verdict)},
                  {"style", "highlight"},
                  {"abnormal_seq", abnormal_seq}},
                 end);
  }

  if (!dialogue_) return;
  if (verdict.any) {
    AbnormalContext ctx{seg.label, verdict, features, start, explanations};
    for (const auto& r : dialogue_->broadcast(AbnormalEvent{ctx}, end)) record(r);
  }
  for (const auto& r : dialogue_->broadcast(ActivityCompletion{seg.label, start, {}}, end)) record(r);
}

void Pipeline::record(const StepResult& r) {
  for (const auto& m : r.messages) bus_.publish(Topic::DialogueMessage, to_json(m), m.timestamp);
  for (const auto& e : r.effects) {
    const auto req = dialogue_->requests().get(e.request_id);
    if (!req) continue;
    switch (e.kind) {
      case SideEffect::Kind::RequestStored:
        bus_.publish(Topic::RequestStored,
                     {{"id", req->id},
                      {"target_user", req->target_user},
                      {"question_text", req->question_text},
                      {"created_at", format_timestamp(req->created_at)},
                      {"status", std::string(to_string(RequestStatus::Stored))}},
                     now_);
        break;
      case SideEffect::Kind::RequestAnswered:
      case SideEffect::Kind::RequestDeclined:
        bus_.publish(Topic::RequestAnswered,
                     {{"id", req->id}, {"status", std::string(to_string(req->status))}}, now_);
        break;
      case SideEffect::Kind::RequestPrompted:
        break;
    }
  }
}

StepResult Pipeline::open_session(Role role, const std::string& user_name) {
  std::lock_guard lock(mu_);
  if (!dialogue_) throw Error("invalid_argument", "pipeline runs without a dialogue engine");
  auto r = dialogue_->open_session(role, user_name, now_);
  record(r);
  return r;
}

StepResult Pipeline::converse(const std::string& session_id, const std::string& text) {
  std::lock_guard lock(mu_);
  if (!dialogue_) throw Error("invalid_argument", "pipeline runs without a dialogue engine");
  const Role role = dialogue_->session(session_id).role;
  auto r = dialogue_->step(session_id, UserUtterance{text}, now_);
  const DialogueMessage said{role == Role::Caregiver ? Speaker::Caregiver : Speaker::OlderAdult, text, now_,
                             session_id};
  if (said.text.find_first_not_of(" \t\r\n") != std::string::npos) bus_.publish(Topic::DialogueMessage, to_json(said), now_);
  record(r);
  return r;
}

PipelineStats Pipeline::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

Timestamp Pipeline::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

}  // namespace adl
