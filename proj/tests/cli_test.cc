//
// Copyright 2026 The Aniso Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "aniso/experiments.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace aniso::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / "aniso_cli_test" / info->name();
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& config, const std::string& name = "config.json") {
    const fs::path path = dir_ / name;
    std::ofstream(path) << config.dump(2);
    return path;
  }

  fs::path dir_;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json dp_audit_config() {
  return json::parse(R"({
    "schema_version": 1,
    "seed": 5,
    "output_dir": "out",
    "experiment": {
      "type": "dp-audit",
      "epsilon": 0.5,
      "T1": 2,
      "T2": 2,
      "dataset": {"kind": "blobs", "classes": 2, "per_class": 10, "dim": 2, "separation": 2.0},
      "model": {"hidden": 4},
      "train": {"scheme": "anisotropic", "sigma2": 0.01, "lr": 0.1, "iters": 10, "batch": 5}
    }
  })");
}

json ou_config() {
  return json::parse(R"({
    "schema_version": 1,
    "seed": 1,
    "output_dir": "out",
    "experiment": {
      "type": "ou-exact",
      "B": [[1.0]], "b": [0.0], "sigma": [[1.0]], "x0": [1.0],
      "times": [0.34657359027997264, "inf"]
    }
  })");
}

bool has_path(const json& report, const std::string& path) {
  for (const auto& e : report["errors"]) {
    if (e["path"] == path) return true;
  }
  return false;
}

TEST_F(CliTest, MissingEpsilonIsReportedAtItsPath) {
  json c = dp_audit_config();
  c["experiment"].erase("epsilon");
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_EQ(o.report["status"], "invalid");
  EXPECT_TRUE(has_path(o.report, "experiment.epsilon")) << o.report.dump();
}

TEST_F(CliTest, ValidConfigHasEmptyErrorList) {
  const Outcome o = validate_config_file(write_config(dp_audit_config()));
  EXPECT_EQ(o.exit_code, 0) << o.report.dump();
  EXPECT_TRUE(o.report["errors"].empty());
  EXPECT_EQ(o.report["derived"]["trainings"], 8);
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(CliTest, BatchLargerThanDatasetIsRejected) {
  json c = dp_audit_config();
  c["experiment"]["train"]["batch"] = 21;
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_EQ(o.exit_code, 1);
  ASSERT_TRUE(has_path(o.report, "experiment.train.batch")) << o.report.dump();
  EXPECT_NE(o.report["errors"][0]["message"].get<std::string>().find("batch <= N"), std::string::npos);

  // Removing a point leaves N - 1 rows.
  c["experiment"]["train"]["batch"] = 20;
  c["experiment"]["adjacency"] = "remove";
  EXPECT_EQ(validate_config_file(write_config(c)).exit_code, 1);
  c["experiment"]["adjacency"] = "replace";
  EXPECT_EQ(validate_config_file(write_config(c)).exit_code, 0);
}

TEST_F(CliTest, UnknownKeysAreRejected) {
  json c = ou_config();
  c["experiment"]["tmes"] = json::array({1.0});
  c["extra"] = 1;
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_TRUE(has_path(o.report, "experiment.tmes"));
  EXPECT_TRUE(has_path(o.report, "extra"));
}

TEST_F(CliTest, UnknownExperimentAndBadTypes) {
  json c = ou_config();
  c["experiment"]["type"] = "nope";
  EXPECT_TRUE(has_path(validate_config_file(write_config(c)).report, "experiment.type"));

  c = ou_config();
  c["experiment"]["x0"] = "one";
  c["seed"] = -3;
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_TRUE(has_path(o.report, "experiment.x0"));
  EXPECT_TRUE(has_path(o.report, "seed"));
}

TEST_F(CliTest, MalformedJsonIsAValidationFailure) {
  std::ofstream(dir_ / "bad.json") << "{\"seed\": ";
  const Outcome o = run_config_file(dir_ / "bad.json");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_EQ(o.report["errors"].size(), 1u);
  EXPECT_EQ(run_config_file(dir_ / "missing.json").exit_code, 1);
}

TEST_F(CliTest, NonSpdSigmaIsReportedAtItsPath) {
  json c = ou_config();
  c["experiment"]["sigma"] = json::array({json::array({-1.0})});
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_TRUE(has_path(o.report, "experiment.sigma")) << o.report.dump();
}

TEST_F(CliTest, OuExactWritesGaussianState) {
  const Outcome o = run_config_file(write_config(ou_config()));
  ASSERT_EQ(o.exit_code, 0) << o.report.dump();
  const json s = json::parse(slurp(dir_ / "out" / "gaussian_state.json"));
  EXPECT_NEAR(s["states"][0]["mean"][0].get<double>(), std::exp(-0.34657359027997264), 1e-15);
  EXPECT_NEAR(s["states"][0]["cov"][0][0].get<double>(), 0.25, 1e-15);
  EXPECT_EQ(s["states"][1]["time"], "inf");
  EXPECT_NEAR(s["invariant"]["cov"][0][0].get<double>(), 0.5, 1e-15);
}

TEST_F(CliTest, ManifestRecordsRun) {
  const fs::path path = write_config(ou_config());
  ASSERT_EQ(run_config_file(path).exit_code, 0);
  const json m = json::parse(slurp(dir_ / "out" / "manifest.json"));
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["experiment"], "ou-exact");
  EXPECT_EQ(m["config_hash"], config_hash(ou_config()));
  EXPECT_EQ(m["outputs"], json::array({"gaussian_state.json"}));
  EXPECT_TRUE(m.contains("started_at"));
  EXPECT_GE(m["wall_clock_seconds"].get<double>(), 0.0);
  EXPECT_EQ(m["versions"]["aniso"], ANISO_VERSION);
}

TEST_F(CliTest, ConfigHashTracksSemanticContent) {
  const json a = ou_config();
  // Key order and whitespace do not matter.
  EXPECT_EQ(config_hash(a), config_hash(json::parse(a.dump(4))));
  json b = a;
  b["experiment"]["x0"][0] = 1.0000001;
  EXPECT_NE(config_hash(a), config_hash(b));
  json c = a;
  c["seed"] = 2;
  EXPECT_NE(config_hash(a), config_hash(c));
}

TEST_F(CliTest, Fig2RatioIsTenToOne) {
  const json c = json::parse(R"({
    "schema_version": 1, "seed": 1, "output_dir": "out",
    "experiment": {"type": "optimize-cov", "s": [10, 1], "zeta": [0.1, 1, 7, 100]}
  })");
  ASSERT_EQ(run_config_file(write_config(c)).exit_code, 0);
  std::istringstream csv(slurp(dir_ / "out" / "optimal_cov.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "zeta,v0,v1,kl_term,isotropic_kl_term,trace");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string z, v0, v1;
    std::getline(row, z, ',');
    std::getline(row, v0, ',');
    std::getline(row, v1, ',');
    EXPECT_NEAR(std::stod(v0) / std::stod(v1), 10.0, 1e-12) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

// Each experiment type twice with the same seed: identical bytes except the
// manifest's timing fields.
TEST_F(CliTest, RunsAreReproducible) {
  const std::vector<json> configs = {
      ou_config(),
      dp_audit_config(),
      json::parse(R"({"schema_version": 1, "seed": 9, "output_dir": "out",
        "experiment": {"type": "simulate", "B": [[1, 0], [0, 2]], "b": [1, 0],
          "sigma": [[1, 0.3], [0.3, 1]], "x0": [0, 0], "step": 0.01, "horizon": 0.5,
          "paths": 50, "record_stride": 5}})"),
      json::parse(R"({"schema_version": 1, "seed": 9, "output_dir": "out",
        "experiment": {"type": "kl-bound", "B": [[1]], "b": [0], "sigma": [[1]], "x0": [0],
          "b_prime": [0.1], "sigma_prime": [[1.5]], "step": 0.01, "horizon": 0.5, "paths": 50,
          "record_stride": 10}})"),
      json::parse(R"({"schema_version": 1, "seed": 4, "output_dir": "out",
        "experiment": {"type": "membership", "target": 3, "runs": 3,
          "dataset": {"kind": "blobs", "classes": 2, "per_class": 8, "dim": 2, "separation": 2},
          "train": {"scheme": "isotropic", "sigma2": 0.1, "lr": 0.1, "iters": 5, "batch": 4}}})"),
      json::parse(R"({"schema_version": 1, "seed": 1, "output_dir": "out",
        "experiment": {"type": "quad-tradeoff", "condition": 10, "shift": 0.1, "t": 3,
          "x_range": [0.5, 2], "y_range": [0.5, 2], "resolution": 3,
          "sweep": {"lo": 0.5, "hi": 2, "base": 1}}})"),
  };
  for (const json& c : configs) {
    const std::string type = c["experiment"]["type"];
    std::map<std::string, std::string> first;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path path = write_config(c);
      fs::remove_all(dir_ / "out");
      const Outcome o = run_config_file(path);
      ASSERT_EQ(o.exit_code, 0) << type << " " << o.report.dump();
      for (const auto& name : o.report["outputs"]) {
        std::string bytes = slurp(dir_ / "out" / name.get<std::string>());
        if (name == "manifest.json" || name == "audit_report.json") {
          json j = json::parse(bytes);
          j.erase("started_at");
          j.erase("wall_clock_seconds");
          j.erase("runtime_seconds");
          bytes = j.dump();
        }
        if (rep == 0) {
          first[name] = bytes;
        } else {
          EXPECT_EQ(first[name], bytes) << type << "/" << name.get<std::string>();
        }
      }
    }
  }
}

TEST_F(CliTest, OutputsStayInsideOutputDir) {
  fs::create_directories(dir_ / "cfg");
  json c = ou_config();
  c["output_dir"] = "nested/run";
  const fs::path path = write_config(c, "cfg/config.json");
  ASSERT_EQ(run_config_file(path).exit_code, 0);
  std::vector<std::string> files;
  for (const auto& f : fs::recursive_directory_iterator(dir_)) {
    if (f.is_regular_file()) files.push_back(fs::relative(f.path(), dir_).string());
  }
  std::sort(files.begin(), files.end());
  EXPECT_EQ(files, (std::vector<std::string>{"cfg/config.json", "cfg/nested/run/gaussian_state.json",
                                             "cfg/nested/run/manifest.json"}));
}

TEST_F(CliTest, CsvDatasetResolvesRelativeToConfig) {
  fs::create_directories(dir_ / "data");
  std::ofstream(dir_ / "data" / "points.csv") << "f0,f1,label\n0.1,0.2,0\n1.5,1.0,1\n-0.3,0.0,0\n2.0,2.0,1\n";
  json c = dp_audit_config();
  c["experiment"]["dataset"] = {{"kind", "csv"}, {"path", "data/points.csv"}};
  c["experiment"]["train"]["batch"] = 2;
  const Outcome o = validate_config_file(write_config(c));
  EXPECT_EQ(o.exit_code, 0) << o.report.dump();
  EXPECT_EQ(o.report["derived"]["dataset_size"], 4);

  c["experiment"]["dataset"]["path"] = "data/absent.csv";
  EXPECT_TRUE(has_path(validate_config_file(write_config(c)).report, "experiment.dataset.path"));
}

TEST_F(CliTest, NumericalFailureExitsWithTwo) {
  Plan plan;
  plan.type = "ou-exact";
  plan.output_dir = dir_ / "out";
  plan.execute = [](const fs::path&) -> std::vector<std::string> {
    throw NotPositiveDefinite("cholesky", "pivot 2 is -1");
  };
  const Outcome o = execute_plan(plan, ou_config());
  EXPECT_EQ(o.exit_code, 2);
  EXPECT_EQ(o.report["status"], "numerical_failure");
  EXPECT_EQ(o.report["operation"], "cholesky");
  EXPECT_FALSE(fs::exists(dir_ / "out" / "manifest.json"));
}

TEST_F(CliTest, EveryShippedConfigValidates) {
  int seen = 0;
  for (const auto& f : fs::directory_iterator(ANISO_CONFIG_DIR)) {
    if (f.path().extension() != ".json") continue;
    const Outcome o = validate_config_file(f.path());
    EXPECT_EQ(o.exit_code, 0) << f.path() << " " << o.report.dump();
    ++seen;
  }
  EXPECT_GE(seen, 10);
}

}  // namespace
}  // namespace aniso::cli
