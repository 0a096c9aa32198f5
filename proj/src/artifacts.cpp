#include "adl/artifacts.hpp"

#include <fstream>

namespace adl {
namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "adlmon.hmm";
constexpr const char* kAnomalyFormat = "adlmon.anomaly";

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse", "'" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw Error("io", "write to '" + path.string() + "' failed");
}

void check_header(const json& doc, const char* format) {
  if (!doc.is_object() || doc.value("format", std::string{}) != format) {
    throw Error("version", std::string("not a ") + format + " artifact");
  }
  const int version = doc.value("version", 0);
  if (version != kArtifactVersion) {
    throw Error("version", std::string(format) + " version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(kArtifactVersion) + ")");
  }
}

template <typename Fn>
auto wrap_schema(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error("parse", std::string("artifact schema: ") + e.what());
  }
}

}  // namespace

json model_to_json(const HmmModel& m) {
  json states = json::array();
  for (auto s : m.states) states.push_back(std::string(to_string(s)));
  return {{"format", kModelFormat},
          {"version", kArtifactVersion},
          {"states", states},
          {"n_sensors", m.n_sensors},
          {"smoothing", m.smoothing},
          {"fingerprint", m.fingerprint},
          {"pi", m.pi},
          {"A", m.A},
          {"B", m.B}};
}

HmmModel model_from_json(const json& doc) {
  check_header(doc, kModelFormat);
  return wrap_schema([&] {
    HmmModel m;
    for (const auto& s : doc.at("states")) m.states.push_back(label_from_string(s.get<std::string>()));
    m.n_sensors = doc.at("n_sensors").get<int>();
    m.smoothing = doc.at("smoothing").get<double>();
    m.fingerprint = doc.at("fingerprint").get<std::string>();
    m.pi = doc.at("pi").get<std::vector<double>>();
    m.A = doc.at("A").get<std::vector<std::vector<double>>>();
    m.B = doc.at("B").get<std::vector<std::vector<double>>>();
    m.validate();
    return m;
  });
}

void save_model(const std::filesystem::path& path, const HmmModel& model) {
  write_json(path, model_to_json(model));
}

HmmModel load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

json stats_to_json(const GaussianStats& stats) {
  json out = json::object();
  for (auto label : kAllLabels) {
    json per = json::object();
    for (auto f : {Feature::Duration, Feature::Frequency, Feature::StartHour}) {
      const Gaussian& g = stats.get(label, f);
      per[std::string(to_string(f))] = {{"mu", g.mu}, {"sigma", g.sigma}, {"n", g.n}};
    }
    out[std::string(to_string(label))] = per;
  }
  return out;
}

GaussianStats stats_from_json(const json& doc) {
  return wrap_schema([&] {
    GaussianStats stats;
    for (auto label : kAllLabels) {
      const json& per = doc.at(std::string(to_string(label)));
      for (auto f : {Feature::Duration, Feature::Frequency, Feature::StartHour}) {
        const json& g = per.at(std::string(to_string(f)));
        Gaussian& dst = stats.at(label, f);
        dst.mu = g.at("mu").get<double>();
        dst.sigma = g.at("sigma").get<double>();
        dst.n = g.at("n").get<std::size_t>();
      }
    }
    return stats;
  });
}

json anomaly_to_json(const AnomalyArtifacts& a) {
  json trees = json::object();
  for (auto f : kFeatures) trees[std::string(to_string(f))] = a.detectors.tree(f).to_json();
  return {{"format", kAnomalyFormat},
          {"version", kArtifactVersion},
          {"model_fingerprint", a.model_fingerprint},
          {"seed", a.seed},
          {"n_synth_days", a.n_synth_days},
          {"ci_z", kCiZ},
          {"transition_threshold", kTransitionThreshold},
          {"marginals", a.marginals},
          {"stats", stats_to_json(a.stats)},
          {"detectors",
           {{"max_depth", a.detectors.config.max_depth},
            {"min_leaf", a.detectors.config.min_leaf},
            {"trees", trees}}}};
}

AnomalyArtifacts anomaly_from_json(const json& doc) {
  check_header(doc, kAnomalyFormat);
  return wrap_schema([&] {
    AnomalyArtifacts a;
    a.model_fingerprint = doc.at("model_fingerprint").get<std::string>();
    a.seed = doc.at("seed").get<std::uint64_t>();
    a.n_synth_days = doc.at("n_synth_days").get<int>();
    a.marginals = doc.at("marginals").get<LabelMarginals>();
    a.stats = stats_from_json(doc.at("stats"));
    const json& d = doc.at("detectors");
    a.detectors.config.max_depth = d.at("max_depth").get<int>();
    a.detectors.config.min_leaf = d.at("min_leaf").get<int>();
    for (auto f : kFeatures) {
      a.detectors.trees[index_of(f)] = DecisionTree::from_json(d.at("trees").at(std::string(to_string(f))));
      if (a.detectors.trees[index_of(f)].n_features() != kDetectorInputs) {
        throw Error("version", "detector input layout does not match this build");
      }
    }
    return a;
  });
}

void save_anomaly(const std::filesystem::path& path, const AnomalyArtifacts& artifacts) {
  write_json(path, anomaly_to_json(artifacts));
}

AnomalyArtifacts load_anomaly(const std::filesystem::path& path) {
  return anomaly_from_json(read_json(path));
}

void check_compatible(const HmmModel& model, const AnomalyArtifacts& artifacts) {
  if (model.fingerprint != artifacts.model_fingerprint) {
    throw Error("version", "anomaly artifacts were fit against model " + artifacts.model_fingerprint +
                               ", loaded model is " + model.fingerprint);
  }
}

AnomalyFit fit_anomaly(const Recording& recording, const HmmModel& model, std::uint64_t seed,
                       int n_synth_days, const TreeConfig& config) {
  if (recording.days.empty()) throw Error("invalid_argument", "empty recording");
  const auto segments = segment_labels(recording);
  AnomalyFit fit;
  fit.rows = featurize(segments, model);
  fit.real_rows = fit.rows.size();

  AnomalyArtifacts& a = fit.artifacts;
  a.stats = fit_gaussians(fit.rows);
  a.marginals = label_marginals(fit.rows);
  a.model_fingerprint = model.fingerprint;
  a.seed = seed;
  a.n_synth_days = n_synth_days;

  if (n_synth_days > 0) {
    // Only labels with a usable duration prior can be drawn.
    LabelMarginals drawable = a.marginals;
    for (auto label : kAllLabels) {
      if (!a.stats.get(label, Feature::Duration).usable()) drawable[index_of(label)] = 0.0;
    }
    const Timestamp first = recording.days.back().date + kSecondsPerDay;
    auto synth = gen_synthetic(a.stats, drawable, n_synth_days, seed, model, first);
    fit.rows.insert(fit.rows.end(), synth.begin(), synth.end());
  }

  fit.labels.reserve(fit.rows.size());
  for (const auto& r : fit.rows) fit.labels.push_back(rule_label(r.features, a.stats, model));
  a.detectors = train_detectors(fit.rows, fit.labels, config);
  return fit;
}

}  // namespace adl
