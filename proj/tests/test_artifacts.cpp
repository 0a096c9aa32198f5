#include <doctest.h>

#include <fstream>

#include "adl/artifacts.hpp"
#include "support.hpp"

using namespace adl;
using nlohmann::json;

namespace {

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST_CASE("model round-trips exactly") {
  const auto& t = test::trained_household();
  test::TempDir dir;
  save_model(dir / "model.json", t.model);
  const HmmModel back = load_model(dir / "model.json");
  CHECK(back == t.model);
  CHECK(model_from_json(model_to_json(t.model)) == t.model);

  std::ifstream in(dir / "model.json");
  const json doc = json::parse(in);
  CHECK(doc["format"] == "adlmon.hmm");
  CHECK(doc["version"] == kArtifactVersion);
}

TEST_CASE("anomaly artifacts round-trip exactly") {
  const auto& t = test::trained_household();
  test::TempDir dir;
  save_anomaly(dir / "anomaly.json", t.fit.artifacts);
  const AnomalyArtifacts back = load_anomaly(dir / "anomaly.json");
  CHECK(back == t.fit.artifacts);
  CHECK(stats_from_json(stats_to_json(t.fit.artifacts.stats)) == t.fit.artifacts.stats);
  CHECK(anomaly_to_json(back)["format"] == "adlmon.anomaly");
}

TEST_CASE("loading rejects other formats and versions") {
  const auto& t = test::trained_household();
  json doc = model_to_json(t.model);
  doc["version"] = kArtifactVersion + 1;
  CHECK(code_of([&] { model_from_json(doc); }) == "version");
  doc = model_to_json(t.model);
  doc["format"] = "adlmon.anomaly";
  CHECK(code_of([&] { model_from_json(doc); }) == "version");
  CHECK(code_of([&] { anomaly_from_json(model_to_json(t.model)); }) == "version");

  doc = model_to_json(t.model);
  doc.erase("A");
  CHECK(code_of([&] { model_from_json(doc); }) == "parse");

  doc = model_to_json(t.model);
  doc["A"][0][0] = 0.9;  // breaks a row sum
  CHECK_FALSE(code_of([&] { model_from_json(doc); }).empty());

  test::TempDir dir;
  CHECK(code_of([&] { load_model(dir / "missing.json"); }) == "io");
  std::ofstream(dir / "junk.json") << "{not json";
  CHECK(code_of([&] { load_model(dir / "junk.json"); }) == "parse");
}

TEST_CASE("artifacts must match the model they were fit against") {
  const auto& t = test::trained_household();
  CHECK_NOTHROW(check_compatible(t.model, t.fit.artifacts));
  HmmModel other = train_ml(test::household(3), 1.0);
  CHECK(other.fingerprint != t.model.fingerprint);
  CHECK(code_of([&] { check_compatible(other, t.fit.artifacts); }) == "version");
}

TEST_CASE("fitting is deterministic under the seed") {
  const auto& t = test::trained_household();
  const AnomalyFit again = fit_anomaly(test::household(), t.model, 11, 30, TreeConfig{});
  CHECK(again.artifacts == t.fit.artifacts);
  const AnomalyFit other = fit_anomaly(test::household(), t.model, 12, 30, TreeConfig{});
  CHECK_FALSE(other.rows == t.fit.rows);
  CHECK(other.artifacts.stats == t.fit.artifacts.stats);
}
