#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "elc/config.hpp"
#include "testing.hpp"

using namespace elc;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ELC_CLI_PATH) + " " + args + " >>'" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

}  // namespace

TEST_CASE("end-to-end commands succeed on the smoke config") {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  const fs::path cfg = fs::path(ELC_CONFIG_DIR) / "smoke.json";
  CHECK(run("gen-data " + q(cfg) + " -o " + q(dir / "data"), log) == 0);
  CHECK(fs::exists(dir / "data" / "train" / "frames.bin"));
  CHECK(fs::exists(dir / "data" / "test" / "labels.csv"));

  const fs::path run_dir = dir / "runs" / "ELC" / "seed1";
  CHECK(run("train " + q(cfg) + " -d " + q(dir / "data") + " -o " + q(run_dir), log) == 0);
  for (const char* f : {"model.ckpt", "predictions.csv", "recall_table.csv", "run_summary.json", "train_log.csv",
                        "risk_coverage.csv", "snr_table.csv", "roc.csv", "selective_summary.json", "config.json"}) {
    INFO(f);
    CHECK(fs::exists(run_dir / f));
  }

  CHECK(run("eval " + q(run_dir / "model.ckpt") + " " + q(dir / "data") + " -o " + q(dir / "eval"), log) == 0);
  CHECK(fs::exists(dir / "eval" / "predictions.csv"));
  std::ifstream a(run_dir / "predictions.csv");
  std::ifstream b(dir / "eval" / "predictions.csv");
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  CHECK(run("selpred " + q(run_dir / "predictions.csv") + " --coverage 0.8 -o " + q(dir / "sel"), log) == 0);
  CHECK(fs::exists(dir / "sel" / "snr_table.csv"));

  CHECK(run("report " + q(dir / "runs"), log) == 0);
  CHECK(fs::exists(dir / "runs" / "table1.csv"));
}

TEST_CASE("configuration problems exit with 1") {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  CHECK(run("", log) == 1);
  CHECK(run("frobnicate", log) == 1);
  CHECK(run("train " + q(dir / "missing.json"), log) == 1);
  write_text(dir / "broken.json", "{\"model\": ");
  CHECK(run("train " + q(dir / "broken.json"), log) == 1);
  write_text(dir / "alpha.json", R"({"model": {"alpha": [0.9, 0.9]}})");
  CHECK(run("gen-data " + q(dir / "alpha.json"), log) == 1);
  CHECK(run("selpred " + q(dir / "p.csv") + " --coverage 1.5", log) == 1);
  CHECK(run("train " + q(fs::path(ELC_CONFIG_DIR) / "smoke.json") + " --variant Perceptron", log) == 1);
}

TEST_CASE("data problems exit with 2") {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  CHECK(run("eval " + q(dir / "none.ckpt") + " " + q(dir.path()), log) == 2);
  write_text(dir / "bad.ckpt", "ELCK garbage");
  CHECK(run("eval " + q(dir / "bad.ckpt") + " " + q(dir.path()), log) == 2);
  write_text(dir / "preds.csv", "sample,task,true_class,predicted_class,uncertainty,snr_db\n0,0,1,1,-3,0\n");
  CHECK(run("selpred " + q(dir / "preds.csv"), log) == 2);
  CHECK(run("selpred " + q(dir / "absent.csv"), log) == 2);
  fs::create_directories(dir / "empty");
  CHECK(run("report " + q(dir / "empty"), log) == 2);
}

TEST_CASE("a diverging run exits with 3") {
  testing::TempDir dir;
  const fs::path log = dir / "log.txt";
  auto cfg = load_config(fs::path(ELC_CONFIG_DIR) / "smoke.json");
  cfg.data.waveforms_per_class = 4;
  cfg.model.variant = Variant::kStLinear;
  cfg.train.learning_rate = 1e250;
  cfg.train.grad_clip = 0.0;
  cfg.train.momentum = 0.0;
  write_text(dir / "diverge.json", to_json(cfg));
  CHECK(run("train " + q(dir / "diverge.json") + " -o " + q(dir / "run"), log) == 3);
}
