// adlmon: train, evaluate, fit anomaly detectors, replay scenarios, serve.
#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "adl/artifacts.hpp"
#include "adl/bus.hpp"
#include "adl/dialogue.hpp"
#include "adl/hmm.hpp"
#include "adl/household.hpp"
#include "adl/ingest.hpp"
#include "adl/pipeline.hpp"
#include "adl/service.hpp"
#include "adl/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataArgs {
  std::string dataset;
  std::string slices;
  std::string sensor_map;
  bool auto_sensors = false;
  bool later_wins = false;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--dataset", a.dataset, "directory with *Sensors*.txt and *ADLs*.txt");
  cmd->add_option("--slices", a.slices, "JSONL slice file instead of a dataset directory");
  cmd->add_option("--sensor-map", a.sensor_map, "sensor map JSON (default: sensor_map.json in the dataset, else OrdonezA)");
  cmd->add_flag("--auto-sensors", a.auto_sensors, "assign sensor indices from the names in the sensor file");
  cmd->add_flag("--later-wins", a.later_wins, "let later annotations win where annotations overlap");
}

adl::Recording load_recording(const DataArgs& a) {
  if (a.dataset.empty() == a.slices.empty()) {
    throw adl::Error("usage", "give exactly one of --dataset or --slices");
  }
  if (!a.slices.empty()) {
    std::ifstream in(a.slices);
    if (!in) throw adl::Error("io", "cannot open '" + a.slices + "'");
    return adl::read_slices_jsonl(in);
  }
  adl::SensorMap map;
  if (!a.sensor_map.empty()) {
    map = adl::SensorMap::load(a.sensor_map);
  } else if (fs::exists(fs::path(a.dataset) / "sensor_map.json")) {
    map = adl::SensorMap::load(fs::path(a.dataset) / "sensor_map.json");
  } else if (a.auto_sensors) {
    std::ifstream in(adl::find_dataset_files(a.dataset).sensors);
    map = adl::SensorMap::from_names(in);
  } else {
    map = adl::SensorMap::ordonez_a();
  }
  adl::DiscretizeOptions opt;
  if (a.later_wins) opt.overlap = adl::AnnotationOverlap::kLaterWins;
  return adl::discretize(adl::load_dataset(a.dataset, map), map.size(), opt);
}

fs::path artifacts_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ADLMON_ARTIFACTS"); env && *env) return env;
  return {};
}

fs::path output_path(const std::string& flag, const char* default_name) {
  if (!flag.empty()) return flag;
  const auto dir = artifacts_dir({});
  if (dir.empty()) throw adl::Error("usage", std::string("--out is required (or set ADLMON_ARTIFACTS)"));
  fs::create_directories(dir);
  return dir / default_name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw adl::Error("io", "cannot write '" + path.string() + "'");
  out << text;
}

struct DialogueArgs {
  std::string intents;
  std::string phrases;
  std::string name = "Alice";
};

void add_dialogue_options(CLI::App* cmd, DialogueArgs& a) {
  cmd->add_option("--intents", a.intents, "intent keyword config");
  cmd->add_option("--phrases", a.phrases, "verb table and template config");
  cmd->add_option("--name", a.name, "name of the monitored person")->capture_default_str();
}

adl::DialogueEngine make_engine(const DialogueArgs& a) {
  return adl::DialogueEngine(a.intents.empty() ? adl::IntentSet::defaults() : adl::IntentSet::load(a.intents),
                             a.phrases.empty() ? adl::Phrasebook::defaults() : adl::Phrasebook::load(a.phrases),
                             a.name);
}

std::atomic<adl::Service*> g_service{nullptr};
std::atomic<bool> g_interrupted{false};

void on_signal(int) {
  g_interrupted = true;
  if (auto* s = g_service.load()) s->stop();
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ambient activity monitoring: HMM recognition, anomaly explanation, caregiver dialogue"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a seeded synthetic household in the OrdonezA layout");
  std::string gen_out;
  adl::HouseholdConfig hh;
  std::string gen_start = "2011-11-28";
  std::string gen_prefix = "Household";
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--days", hh.n_days)->capture_default_str();
  gen->add_option("--seed", hh.seed)->capture_default_str();
  gen->add_option("--noise", hh.noise)->capture_default_str();
  gen->add_option("--start", gen_start, "first day, YYYY-MM-DD")->capture_default_str();
  gen->add_option("--prefix", gen_prefix)->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "fit the activity HMM by maximum likelihood");
  DataArgs train_data;
  double train_alpha = 1.0;
  std::string train_out;
  add_data_options(train, train_data);
  train->add_option("--smoothing", train_alpha, "additive smoothing")->capture_default_str();
  train->add_option("--out", train_out, "model file (default $ADLMON_ARTIFACTS/model.json)");

  // eval
  auto* eval = app.add_subcommand("eval", "leave-one-day-out evaluation");
  DataArgs eval_data;
  double eval_alpha = 1.0;
  bool eval_json = false;
  bool eval_per_class = false;
  bool eval_detectors = false;
  std::uint64_t eval_seed = 42;
  int eval_synth = 30;
  add_data_options(eval, eval_data);
  eval->add_option("--smoothing", eval_alpha)->capture_default_str();
  eval->add_flag("--json", eval_json, "print the full report as JSON");
  eval->add_flag("--per-class", eval_per_class, "add per-activity F1 rows");
  eval->add_flag("--detectors", eval_detectors, "also evaluate the per-feature anomaly detectors");
  eval->add_option("--seed", eval_seed, "synthetic data seed for --detectors")->capture_default_str();
  eval->add_option("--synth-days", eval_synth, "synthetic days for --detectors")->capture_default_str();

  // fit-anomaly
  auto* fit = app.add_subcommand("fit-anomaly", "fit Gaussian priors and per-feature trees");
  DataArgs fit_data;
  std::string fit_model;
  std::uint64_t fit_seed = 42;
  int fit_synth = 30;
  adl::TreeConfig fit_tree;
  std::string fit_out;
  add_data_options(fit, fit_data);
  fit->add_option("--model", fit_model, "model file (default $ADLMON_ARTIFACTS/model.json)");
  fit->add_option("--seed", fit_seed)->capture_default_str();
  fit->add_option("--synth-days", fit_synth)->capture_default_str();
  fit->add_option("--max-depth", fit_tree.max_depth, "negative: unlimited")->capture_default_str();
  fit->add_option("--min-leaf", fit_tree.min_leaf)->capture_default_str();
  fit->add_option("--out", fit_out, "anomaly file (default $ADLMON_ARTIFACTS/anomaly.json)");

  // replay
  auto* rep = app.add_subcommand("replay", "stream a scenario through the pipeline");
  std::string rep_scenario;
  std::string rep_artifacts;
  std::string rep_log;
  std::string rep_manifest;
  std::optional<double> rep_speed;
  bool rep_serve = false;
  int rep_port = 8080;
  std::string rep_host = "127.0.0.1";
  DialogueArgs rep_dialogue;
  rep->add_option("--scenario", rep_scenario, "scenario JSON")->required();
  rep->add_option("--artifacts", rep_artifacts, "directory with model.json and anomaly.json (default $ADLMON_ARTIFACTS; else trained on the base)");
  rep->add_option("--log", rep_log, "event log directory (default: in memory)");
  rep->add_option("--manifest", rep_manifest, "write the replay report here instead of stdout");
  rep->add_option("--speed", rep_speed, "override the scenario speed");
  rep->add_flag("--serve", rep_serve, "serve the HTTP API while replaying");
  rep->add_option("--port", rep_port)->capture_default_str();
  rep->add_option("--host", rep_host)->capture_default_str();
  add_dialogue_options(rep, rep_dialogue);

  // serve
  auto* srv = app.add_subcommand("serve", "serve the HTTP API over trained artifacts");
  std::string srv_artifacts;
  std::string srv_log;
  int srv_port = 8080;
  std::string srv_host = "127.0.0.1";
  DialogueArgs srv_dialogue;
  srv->add_option("--artifacts", srv_artifacts, "directory with model.json and anomaly.json (default $ADLMON_ARTIFACTS)");
  srv->add_option("--log", srv_log, "event log directory (default: in memory)");
  srv->add_option("--port", srv_port)->capture_default_str();
  srv->add_option("--host", srv_host)->capture_default_str();
  add_dialogue_options(srv, srv_dialogue);

  // dump-config
  auto* dump = app.add_subcommand("dump-config", "write the built-in intent and phrase configs");
  std::string dump_dir;
  dump->add_option("--out", dump_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      hh.start = adl::parse_timestamp(gen_start + " 00:00:00");
      const auto files = adl::write_household(gen_out, hh, gen_prefix);
      std::cout << files.sensors.string() << '\n' << files.activities.string() << '\n';
    } else if (*train) {
      const auto rec = load_recording(train_data);
      const auto model = adl::train_ml(rec, train_alpha);
      const auto out = output_path(train_out, "model.json");
      adl::save_model(out, model);
      std::cout << "model " << model.fingerprint << " -> " << out.string() << '\n';
    } else if (*eval) {
      const auto rec = load_recording(eval_data);
      const auto report = adl::evaluate_lodo(rec, eval_alpha);
      json out = {{"accuracy", report.accuracy}, {"f1_macro", report.f1_macro}, {"days", report.folds.size()}};
      json per = json::object();
      for (const auto& [label, f1] : report.per_class_f1) per[std::string(adl::to_string(label))] = f1;
      out["per_class_f1"] = per;
      json folds = json::array();
      for (const auto& f : report.folds) {
        folds.push_back({{"day", adl::format_date(f.day)}, {"slices", f.slices}, {"accuracy", f.accuracy}});
      }
      out["folds"] = folds;

      std::optional<adl::DetectorEvalReport> det;
      if (eval_detectors) {
        const auto model = adl::train_ml(rec, eval_alpha);
        const auto fitted = adl::fit_anomaly(rec, model, eval_seed, eval_synth, adl::TreeConfig{});
        det = adl::evaluate_detectors_lodo(fitted.rows, fitted.labels, adl::TreeConfig{});
        json rows = json::object();
        for (const auto& s : det->scores) {
          rows[std::string(adl::to_string(s.feature))] = {{"accuracy", s.accuracy},
                                                           {"f1_macro", s.f1_macro},
                                                           {"f1_abnormal", s.f1_abnormal},
                                                           {"positives", s.positives}};
        }
        out["detectors"] = rows;
      }
      if (eval_json) {
        std::cout << out.dump(2) << '\n';
      } else {
        std::cout << "model accuracy f1\n";
        std::cout << "HMM " << fmt2(report.accuracy) << ' ' << fmt2(report.f1_macro) << '\n';
        if (eval_per_class) {
          for (const auto& [label, f1] : report.per_class_f1) {
            std::cout << "  " << adl::to_string(label) << " - " << fmt2(f1) << '\n';
          }
        }
        if (det) {
          for (const auto& s : det->scores) {
            std::cout << adl::to_string(s.feature) << ' ' << fmt2(s.accuracy) << ' ' << fmt2(s.f1_macro) << '\n';
          }
        }
      }
    } else if (*fit) {
      const auto rec = load_recording(fit_data);
      fs::path model_path = fit_model;
      if (model_path.empty()) {
        const auto dir = artifacts_dir({});
        if (dir.empty()) throw adl::Error("usage", "--model is required (or set ADLMON_ARTIFACTS)");
        model_path = dir / "model.json";
      }
      const auto model = adl::load_model(model_path);
      const auto fitted = adl::fit_anomaly(rec, model, fit_seed, fit_synth, fit_tree);
      const auto out = output_path(fit_out, "anomaly.json");
      adl::save_anomaly(out, fitted.artifacts);
      std::cout << "anomaly detectors (" << fitted.rows.size() << " rows, " << fitted.real_rows << " real) -> "
                << out.string() << '\n';
    } else if (*rep) {
      auto scenario = adl::load_scenario(rep_scenario);
      if (rep_speed) {
        scenario.speed = *rep_speed;
        scenario.validate();
      }
      const auto base = adl::load_base(scenario);
      adl::TrainedArtifacts art;
      const auto dir = artifacts_dir(rep_artifacts);
      if (dir.empty()) {
        art = adl::train_artifacts(base, scenario);
      } else {
        art.model = adl::load_model(dir / "model.json");
        art.anomaly = adl::load_anomaly(dir / "anomaly.json");
      }
      const auto prepared = adl::prepare_scenario(scenario, base, art.model, art.anomaly);

      std::unique_ptr<adl::EventBus> bus =
          rep_log.empty() ? std::make_unique<adl::EventBus>() : std::make_unique<adl::EventBus>(fs::path(rep_log));
      auto engine = make_engine(rep_dialogue);
      adl::Pipeline pipeline(art.model, art.anomaly, *bus, adl::PipelineConfig{scenario.lag}, &engine);

      std::unique_ptr<adl::Service> service;
      if (rep_serve) {
        service = std::make_unique<adl::Service>(pipeline, *bus);
        const int port = service->start(rep_host, rep_port);
        std::cerr << "serving on http://" << rep_host << ':' << port << '\n';
      }
      auto report = adl::replay(
          prepared.replay, [&](const adl::TimeSlice& s) { pipeline.push(s); }, scenario.speed, prepared.manifest);
      pipeline.finish();
      bus->flush();
      json out = adl::to_json(report);
      out["abnormal_detected"] = bus->next_seq(adl::Topic::AbnormalDetected);
      out["events"] = bus->size();
      if (rep_manifest.empty()) {
        std::cout << out.dump(2) << '\n';
      } else {
        write_text(rep_manifest, out.dump(2) + "\n");
      }
      if (service) {
        g_service = service.get();
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cerr << "replay finished; serving until interrupted\n";
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        g_service = nullptr;
      }
      if (report.aborted) throw adl::Error("replay", report.error);
    } else if (*srv) {
      const auto dir = artifacts_dir(srv_artifacts);
      if (dir.empty()) throw adl::Error("usage", "--artifacts is required (or set ADLMON_ARTIFACTS)");
      const auto model = adl::load_model(dir / "model.json");
      const auto anomaly = adl::load_anomaly(dir / "anomaly.json");
      std::unique_ptr<adl::EventBus> bus =
          srv_log.empty() ? std::make_unique<adl::EventBus>() : std::make_unique<adl::EventBus>(fs::path(srv_log));
      auto engine = make_engine(srv_dialogue);
      adl::Pipeline pipeline(model, anomaly, *bus, adl::PipelineConfig{}, &engine);
      adl::Service service(pipeline, *bus);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << srv_host << ':' << srv_port << '\n';
      service.listen(srv_host, srv_port);
      g_service = nullptr;
    } else if (*dump) {
      fs::create_directories(dump_dir);
      write_text(fs::path(dump_dir) / "intents.json", adl::IntentSet::defaults().to_json().dump(2) + "\n");
      write_text(fs::path(dump_dir) / "phrases.json", adl::Phrasebook::defaults().to_json().dump(2) + "\n");
      adl::SensorMap::ordonez_a().save(fs::path(dump_dir) / "sensor_map.json");
    }
  } catch (const adl::Error& e) {
    std::string msg = e.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "adlmon: error: " << e.code() << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "adlmon: error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
