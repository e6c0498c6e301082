#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mlgp/cli.hpp"
#include "mlgp/trainer.hpp"

using namespace mlgp;

namespace {

namespace fs = std::filesystem;

std::string tmp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// run_cli with std::cout captured
int run_quiet(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream captured;
  auto* old = std::cout.rdbuf(captured.rdbuf());
  const int rc = run_cli(std::move(args));
  std::cout.rdbuf(old);
  if (out) *out = captured.str();
  return rc;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("full pipeline: synth, basis, train, eval, predict") {
  const std::string dir = tmp_dir("mlgp_cli_pipeline");
  const std::string data = dir + "/data.txt";

  CHECK(run_quiet({"synth", "--n", "40", "--d", "10", "--k", "5", "--seed",
                   "3", "--phi-scale", "1.5", "--out", data}) == 0);
  CHECK(fs::exists(data));
  CHECK(fs::exists(data + ".manifest.json"));

  const std::string basis = dir + "/basis.bin";
  CHECK(run_quiet({"basis", "--data", data, "--rank", "4", "--out", basis}) ==
        0);
  CHECK(fs::exists(basis));

  // epochs 0 still writes the init checkpoint
  const std::string run0 = dir + "/run0";
  CHECK(run_quiet({"train", "--data", data, "--basis", basis, "--latents",
                   "2", "--inducing", "5", "--rank", "4", "--batch", "10",
                   "--epochs", "0", "--seed", "1", "--out", run0}) == 0);
  CHECK(fs::exists(run0 + "/final.ckpt"));
  CHECK(fs::exists(run0 + "/manifest.json"));

  const std::string run = dir + "/run";
  CHECK(run_quiet({"train", "--data", data, "--basis", basis, "--latents",
                   "2", "--inducing", "5", "--rank", "4", "--batch", "10",
                   "--epochs", "5", "--seed", "1", "--out", run}) == 0);
  CHECK(fs::exists(run + "/train_log.jsonl"));

  std::string eval_out;
  CHECK(run_quiet({"eval", "--checkpoint", run + "/final.ckpt", "--basis",
                   basis, "--data", data, "--out", dir + "/report.json"},
                  &eval_out) == 0);
  CHECK(eval_out.find("p_at_1=") != std::string::npos);
  CHECK(fs::exists(dir + "/report.json"));

  CHECK(run_quiet({"predict", "--checkpoint", run + "/final.ckpt", "--basis",
                   basis, "--data", data, "--top", "3", "--out",
                   dir + "/preds.txt"}) == 0);
  const std::string preds = slurp(dir + "/preds.txt");
  CHECK(std::count(preds.begin(), preds.end(), '\n') == 40);
}

TEST_CASE("grad-check on the built-in instance exits zero") {
  std::string out;
  CHECK(run_quiet({"grad-check", "--seed", "5"}, &out) == 0);
  CHECK(out.find("gradient check passed") != std::string::npos);
  CHECK(run_quiet({"grad-check", "--kernel", "se", "--mode", "free-z"}) == 0);
}

TEST_CASE("usage errors exit 1, missing files exit 2") {
  CHECK(run_quiet({"train", "--no-such-flag"}) == 1);
  CHECK(run_quiet({"nonsense-subcommand"}) == 1);
  CHECK(run_quiet({}) == 1);
  CHECK(run_quiet({"eval", "--checkpoint", "/nope.ckpt", "--data",
                   "/nope.txt"}) == 2);
  CHECK(run_quiet({"train", "--data", "/does/not/exist.txt"}) == 2);
}

TEST_CASE("re-running a train manifest reproduces the run bit for bit") {
  const std::string dir = tmp_dir("mlgp_cli_manifest");
  const std::string data = dir + "/data.txt";
  REQUIRE(run_quiet({"synth", "--n", "30", "--d", "8", "--k", "4", "--seed",
                     "7", "--out", data}) == 0);

  const std::string run1 = dir + "/run1";
  REQUIRE(run_quiet({"train", "--data", data, "--latents", "2", "--inducing",
                     "4", "--rank", "3", "--batch", "8", "--epochs", "3",
                     "--seed", "11", "--out", run1}) == 0);

  const std::string run2 = dir + "/run2";
  REQUIRE(run_quiet({"train", "--from-manifest", run1 + "/manifest.json",
                     "--out", run2}) == 0);
  CHECK(slurp(run1 + "/final.ckpt") == slurp(run2 + "/final.ckpt"));

  // manifests agree on the recorded per-epoch bounds
  const std::string m1 = slurp(run1 + "/manifest.json");
  const std::string m2 = slurp(run2 + "/manifest.json");
  const auto key = m1.find("epoch_bound");
  REQUIRE(key != std::string::npos);
  CHECK(m1.substr(key, 120) == m2.substr(key, 120));
}

TEST_CASE("eval from manifest reproduces the report") {
  const std::string dir = tmp_dir("mlgp_cli_eval_manifest");
  const std::string data = dir + "/data.txt";
  REQUIRE(run_quiet({"synth", "--n", "25", "--d", "6", "--k", "4", "--seed",
                     "2", "--out", data}) == 0);
  const std::string basis = dir + "/basis.bin";
  REQUIRE(run_quiet({"basis", "--data", data, "--rank", "3", "--out", basis}) ==
          0);
  const std::string run = dir + "/run";
  REQUIRE(run_quiet({"train", "--data", data, "--basis", basis, "--inducing",
                     "4", "--rank", "3", "--batch", "8", "--epochs", "2",
                     "--seed", "4", "--out", run}) == 0);

  const std::string report1 = dir + "/report1.json";
  std::string out1, out2;
  REQUIRE(run_quiet({"eval", "--checkpoint", run + "/final.ckpt", "--basis",
                     basis, "--data", data, "--ks", "1", "3", "--out",
                     report1},
                    &out1) == 0);
  const std::string report2 = dir + "/report2.json";
  REQUIRE(run_quiet({"eval", "--from-manifest", report1 + ".manifest.json",
                     "--out", report2},
                    &out2) == 0);
  CHECK(slurp(report1) == slurp(report2));
  CHECK(out1 == out2);
}

TEST_CASE("bench runs on a tiny spec and reports both paths") {
  std::string out;
  CHECK(run_quiet({"bench", "--n", "120", "--d", "500", "--m", "16", "--rank",
                   "12", "--batch", "32", "--repeats", "2"},
                  &out) == 0);
  CHECK(out.find("gram_kl_ratio=") != std::string::npos);
  CHECK(out.find("subspace_step_seconds=") != std::string::npos);
}

}  // TEST_SUITE
