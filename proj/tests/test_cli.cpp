// Copyright 2026 The ssid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end tests of the ssid command-line runner: exit codes, artifact
// layout, determinism under a fixed seed, dataset validation, and the
// summarize round trip. The binary path and data directory come from the
// build system.

#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr interleaved
};

CommandResult run_cli(const std::string& args) {
  std::string cmd = std::string(SSID_CLI_PATH) + " " + args + " 2>&1";
  std::array<char, 512> buf;
  CommandResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (std::fgets(buf.data(), buf.size(), pipe)) res.output += buf.data();
  int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("ssid_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("run: fixed seed gives byte-identical artifacts") {
  fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  auto r1 = run_cli("run --model lgss-demo --algorithm smc -N 100 --seed 1 "
                    "--output " + a.string());
  auto r2 = run_cli("run --model lgss-demo --algorithm smc -N 100 --seed 1 "
                    "--output " + b.string());
  CHECK(r1.exit_code == 0);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));

  // A different seed must change the particle-filter trace.
  fs::path c = fresh_dir("det_c");
  run_cli("run --model lgss-demo --algorithm smc -N 100 --seed 2 --output " +
          c.string());
  CHECK(slurp(a / "trace.csv") != slurp(c / "trace.csv"));
}

TEST_CASE("run: capability gate rejects pgas on a sample-only model") {
  auto r = run_cli("run --model dengue --algorithm pgas --dataset " +
                   std::string(SSID_DATA_DIR) + "/dengue_yap.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("transition density unavailable") != std::string::npos);
}

TEST_CASE("run: refuses to overwrite an existing run unless forced") {
  fs::path dir = fresh_dir("overwrite");
  auto first = run_cli("run --model lgss-demo --algorithm smc --output " +
                       dir.string());
  REQUIRE(first.exit_code == 0);
  auto second = run_cli("run --model lgss-demo --algorithm smc --output " +
                        dir.string());
  CHECK(second.exit_code == 1);
  CHECK(second.output.find("--force") != std::string::npos);
  auto forced = run_cli("run --model lgss-demo --algorithm smc --force "
                        "--output " + dir.string());
  CHECK(forced.exit_code == 0);
}

TEST_CASE("run: manifest reruns bit-identically") {
  fs::path a = fresh_dir("manifest_a"), b = fresh_dir("manifest_b");
  auto r1 = run_cli("run --model lgss-demo --algorithm pmmh -M 200 -N 50 "
                    "--seed 11 --output " + a.string());
  REQUIRE(r1.exit_code == 0);
  auto r2 = run_cli("run -c " + (a / "manifest.json").string() +
                    " --output " + b.string());
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(a / "chain_0.jsonl") == slurp(b / "chain_0.jsonl"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
}

TEST_CASE("run: config file keys are overridden by flags") {
  fs::path dir = fresh_dir("config");
  fs::create_directories(dir);
  fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"model":"lgss-demo","algorithm":"smc","N":64,)"
                     << R"("seed":7})";
  auto r = run_cli("run -c " + cfg.string() + " -N 32 --output " +
                   (dir / "out").string());
  REQUIRE(r.exit_code == 0);
  std::string manifest = slurp(dir / "out" / "manifest.json");
  CHECK(manifest.find("\"N\": 32") != std::string::npos);
  CHECK(manifest.find("\"seed\": 7") != std::string::npos);

  std::ofstream(cfg) << R"({"modle":"oops"})";
  auto bad = run_cli("run -c " + cfg.string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("unknown config key") != std::string::npos);
}

TEST_CASE("run: SSID_OUTPUT_ROOT sets the default output root") {
  fs::path root = fresh_dir("envroot");
  std::string cmd = "SSID_OUTPUT_ROOT=" + root.string() + " " +
                    std::string(SSID_CLI_PATH) +
                    " run --model lgss-demo --algorithm smc --output sub 2>&1";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(root / "sub" / "summary.json"));
}

TEST_CASE("validate: dataset censuses and malformed input") {
  std::string data = SSID_DATA_DIR;
  auto tank = run_cli("validate " + data + "/watertank_train.csv "
                      "--model watertank");
  CHECK(tank.exit_code == 0);
  CHECK(tank.output.find("rows: 1024") != std::string::npos);

  auto dengue = run_cli("validate " + data + "/dengue_yap.csv --model dengue");
  CHECK(dengue.exit_code == 0);
  CHECK(dengue.output.find("observations: 197") != std::string::npos);
  CHECK(dengue.output.find("total cases: 978") != std::string::npos);

  fs::path dir = fresh_dir("validate");
  fs::create_directories(dir);
  fs::path empty = dir / "empty.csv";
  std::ofstream(empty).close();
  CHECK(run_cli("validate " + empty.string() + " --model watertank")
            .exit_code == 1);

  fs::path bad = dir / "bad.csv";
  std::ofstream(bad) << "date,y\n2011-01-03,notanumber\n";
  auto r = run_cli("validate " + bad.string() + " --model dengue");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("row 2") != std::string::npos);
}

TEST_CASE("summarize: recomputes a chain summary from JSONL") {
  fs::path dir = fresh_dir("summarize");
  auto r1 = run_cli("run --model lgss-demo --algorithm pg -M 200 -N 50 "
                    "--seed 3 --output " + dir.string());
  REQUIRE(r1.exit_code == 0);
  fs::path chain = dir / "chain_0.jsonl";
  auto r2 = run_cli("summarize " + chain.string());
  CHECK(r2.exit_code == 0);
  CHECK(r2.output.find("param,mean,sd,q05,q25,q50,q75,q95,iact,ess") !=
        std::string::npos);
  CHECK(fs::exists(dir / "chain_0.jsonl.summary.csv"));

  // The recomputed table matches the one the run itself wrote (same 10%
  // burn-in convention).
  CHECK(slurp(dir / "chain_0.jsonl.summary.csv") ==
        slurp(dir / "chain_0_summary.csv"));
}
