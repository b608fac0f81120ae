#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kBin = POSELAB_BIN;
const fs::path kTmp = fs::path(POSELAB_TEST_TMP) / "cli";

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit with code 2, runtime failures with 1") {
  CHECK(run("train-tokenizer") == 2);          // missing required --data
  CHECK(run("no-such-command") == 2);
  CHECK(run("") == 2);                         // subcommand required
  CHECK(run("eval-tokenizer --ckpt /nonexistent/ckpt --data synth:4 --out " +
            (kTmp / "bad").string()) == 1);
  CHECK(run("train-tokenizer --data /nonexistent.ptk --iters 1 --out " +
            (kTmp / "bad2").string()) == 1);
}

TEST_CASE("gen-data is deterministic and produces a loadable dataset") {
  fs::remove_all(kTmp / "gen1");
  fs::remove_all(kTmp / "gen2");
  REQUIRE(run("gen-data --n 64 --seed 9 --out " + (kTmp / "gen1").string()) == 0);
  REQUIRE(run("gen-data --n 64 --seed 9 --out " + (kTmp / "gen2").string()) == 0);
  CHECK(slurp(kTmp / "gen1/poses.ptk") == slurp(kTmp / "gen2/poses.ptk"));
  CHECK(fs::exists(kTmp / "gen1/resolved-config.json"));

  // resolved-config.json replays the run: no flags except the config file.
  fs::remove_all(kTmp / "gen3");
  REQUIRE(run("gen-data --config " + (kTmp / "gen1/resolved-config.json").string() + " --out " +
              (kTmp / "gen3").string()) == 0);
  CHECK(slurp(kTmp / "gen3/poses.ptk") == slurp(kTmp / "gen1/poses.ptk"));
}

TEST_CASE("train/eval round trip on a tiny run") {
  const fs::path out = kTmp / "train1";
  fs::remove_all(out);
  const std::string train_args =
      "train-tokenizer --data synth:48 --iters 40 --batch 2 --seed 3 --tokens 4 "
      "--codebook-size 16 --code-dim 8 --hidden 8 --dtype f64 --out " + out.string();
  REQUIRE(run(train_args) == 0);
  CHECK(fs::exists(out / "checkpoint.json"));
  CHECK(fs::exists(out / "checkpoint.bin"));
  CHECK(fs::exists(out / "train_log.csv"));
  CHECK(fs::exists(out / "resolved-config.json"));

  // Rerunning with the identical seed/config reproduces every report byte.
  const fs::path out_copy = kTmp / "train1_copy";
  fs::remove_all(out_copy);
  fs::create_directories(out_copy);
  for (const char* f : {"checkpoint.json", "checkpoint.bin", "train_log.csv",
                        "train_summary.json"})
    fs::copy_file(out / f, out_copy / f);
  REQUIRE(run(train_args) == 0);
  for (const char* f : {"checkpoint.json", "checkpoint.bin", "train_log.csv",
                        "train_summary.json"})
    CHECK(slurp(out / f) == slurp(out_copy / f));

  const fs::path eval_out = kTmp / "eval1";
  fs::remove_all(eval_out);
  REQUIRE(run("eval-tokenizer --ckpt " + (out / "checkpoint").string() +
              " --data synth:48 --seed 3 --out " + eval_out.string()) == 0);
  const std::string report = slurp(eval_out / "eval.json");
  CHECK(report.find("mean_geodesic_rad") != std::string::npos);
  CHECK(report.find("codebook_utilization") != std::string::npos);

  // The resolved config alone replays the training run bit-identically.
  const fs::path replay = kTmp / "train1_replay";
  fs::remove_all(replay);
  REQUIRE(run("train-tokenizer --config " + (out / "resolved-config.json").string() + " --out " +
              replay.string()) == 0);
  CHECK(slurp(replay / "checkpoint.bin") == slurp(out / "checkpoint.bin"));
  CHECK(slurp(replay / "train_log.csv") == slurp(out / "train_log.csv"));
}

TEST_CASE("tals-thresholds writes a schema-valid file; matched camera gives zeros") {
  const fs::path out = kTmp / "tals1";
  fs::remove_all(out);
  REQUIRE(run("tals-thresholds --scenes 4 --seed 2 --wrong-cam matched --out " + out.string()) ==
          0);
  const std::string text = slurp(out / "thresholds.json");
  CHECK(text.find("\"eps_2d\"") != std::string::npos);
  CHECK(text.find("\"Pelvis\": 0.0") != std::string::npos);
}

TEST_CASE("bias attack emits a row per iteration and is deterministic") {
  const fs::path out = kTmp / "attack1";
  fs::remove_all(out);
  const std::string args =
      "bias attack --iters 25 --seed 1 --out " + out.string();
  REQUIRE(run(args) == 0);
  const std::string csv = slurp(out / "trajectory.csv");
  int rows = -1;  // header
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 25);
  CHECK(fs::exists(out / "tradeoff.svg"));
  CHECK(fs::exists(out / "attack.json"));

  const fs::path out2 = kTmp / "attack1_copy";
  fs::remove_all(out2);
  fs::create_directories(out2);
  fs::copy_file(out / "trajectory.csv", out2 / "trajectory.csv");
  fs::copy_file(out / "attack.json", out2 / "attack.json");
  REQUIRE(run(args) == 0);
  CHECK(slurp(out / "trajectory.csv") == slurp(out2 / "trajectory.csv"));
  CHECK(slurp(out / "attack.json") == slurp(out2 / "attack.json"));
}

TEST_CASE("bias mismatch with matched camera reports perfect PCK") {
  const fs::path out = kTmp / "mm1";
  fs::remove_all(out);
  REQUIRE(run("bias mismatch --scenes 6 --seed 4 --wrong-cam matched --out " + out.string()) == 0);
  const std::string report = slurp(out / "mismatch.json");
  CHECK(report.find("\"pck05\": 1.0") != std::string::npos);
  CHECK(report.find("\"pck10\": 1.0") != std::string::npos);
}

TEST_SUITE_END();
