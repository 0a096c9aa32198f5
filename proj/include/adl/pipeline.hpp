// include/adl/pipeline.hpp
#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adl/anomaly.hpp"
#include "adl/artifacts.hpp"
#include "adl/bus.hpp"
#include "adl/dialogue.hpp"
#include "adl/hmm.hpp"
#include "adl/ingest.hpp"

namespace adl {

enum class VerdictSource : std::uint8_t {
  Rule,      // CI rule on the fitted priors; trees supply the explanation
  Detector,  // per-feature tree predictions
};

struct PipelineConfig {
  int lag = 30;  // fixed-lag decoding window, in slices
  VerdictSource verdicts = VerdictSource::Rule;
};

struct PipelineStats {
  std::size_t slices = 0;
  std::size_t committed = 0;
  std::size_t segments = 0;
  std::size_t abnormal = 0;
};

// Monitoring -> anomaly -> notification -> dialogue, wired over the bus.
// Slices must arrive in time order; a new date closes the previous day.
// All engine and bus writes happen under one lock, so HTTP handlers can call
// converse() while a replay thread calls push().
class Pipeline {
 public:
  // Throws Error{"version"} when the artifacts were fit against another model.
  Pipeline(const HmmModel& model, const AnomalyArtifacts& artifacts, EventBus& bus,
           PipelineConfig config = {}, DialogueEngine* dialogue = nullptr);

  void push(const TimeSlice& slice);
  // Commits the rest of the current day and closes its last segment.
  void end_day();
  void finish() { end_day(); }

  StepResult open_session(Role role, const std::string& user_name);
  StepResult converse(const std::string& session_id, const std::string& text);
  // Runs `fn(engine)` under the pipeline lock.
  template <typename Fn>
  auto with_dialogue(Fn&& fn) {
    std::lock_guard lock(mu_);
    return fn(*dialogue_);
  }

  PipelineStats stats() const;
  Timestamp now() const;
  const HmmModel& model() const { return model_; }
  const AnomalyArtifacts& artifacts() const { return artifacts_; }
  bool has_dialogue() const { return dialogue_ != nullptr; }

 private:
  struct OpenSegment {
    ActivityLabel label;
    int start;
  };

  void commit(int t, ActivityLabel label);
  void close_segment(int end);
  void on_segment(const ActivitySegment& seg);
  void record(const StepResult& r);
  void flush_decoder();

  const HmmModel model_;
  const AnomalyArtifacts artifacts_;
  EventBus& bus_;
  PipelineConfig config_;
  DialogueEngine* dialogue_;
  FixedLagDecoder decoder_;

  mutable std::mutex mu_;
  std::optional<Timestamp> day_;
  std::optional<OpenSegment> open_;
  std::vector<ActivitySegment> day_segments_;
  int last_t_ = -1;
  Timestamp now_ = 0;
  PipelineStats stats_;
};

// Verdict for one featurized segment under the given source.
AnomalyVerdict pipeline_verdict(const ContextFeatures& features, const AnomalyArtifacts& artifacts,
                                const HmmModel& model, VerdictSource source);

nlohmann::json features_to_json(const ContextFeatures& f);

}  // namespace adl
