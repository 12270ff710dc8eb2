#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ledger.h"
#include "msunet/error.h"
#include "run_config.h"
#include "support/temp_dir.h"

namespace msunet::cli {
namespace {

namespace fs = std::filesystem;
using msunet::testing::TempDir;

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

// Every regular file under `root` except the ledger, keyed by relative path.
std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (rel == "ledger.json") continue;
    files[rel] = ReadFile(e.path());
  }
  return files;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the msunet binary with a small, fast configuration.
class Cli {
 public:
  explicit Cli(const TempDir& scratch) : scratch_(scratch) {
    WriteFile(config_, R"({
  "phantom": {"image_size": 16, "n_train": 12, "n_vs1": 3, "n_vs2": 4, "n_test": 3},
  "model": {"base_channels": 4, "depth": 2},
  "train": {"batch_size": 4, "learning_rate": 0.003, "max_epochs": 2, "patience": 2,
            "attenuation_samples": 4},
  "ensemble": {"candidates": 3, "top_k": 2},
  "eval": {"mc_passes": 4, "kde_grid": 16, "render_images": 1},
  "stats": {"replicates": 20}
})");
  }

  RunResult Run(const std::string& args) const {
    const fs::path out = scratch_ / "stdout.txt";
    const fs::path err = scratch_ / "stderr.txt";
    const std::string cmd = std::string(MSUNET_BINARY) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = ReadFile(out);
    r.err = ReadFile(err);
    return r;
  }

  // A stage command against `dir` with the test configuration.
  RunResult Stage(const std::string& command, const fs::path& dir, const std::string& extra = "") const {
    return Run(command + " --config " + config_.string() + " --out " + dir.string() + " " + extra);
  }

  void RunAll(const fs::path& dir, const std::string& extra = "") const {
    for (const char* c : {"generate-data", "train-baseline", "train-candidates", "select", "train-combiner",
                          "evaluate", "report"}) {
      const RunResult r = Stage(c, dir, extra);
      ASSERT_EQ(r.code, 0) << c << ": " << r.err;
    }
  }

 private:
  const TempDir& scratch_;
  fs::path config_ = scratch_ / "config.json";
};

TEST(RunConfigTest, DefaultsValidateAndOverridesApplyInOrder) {
  TempDir dir;
  EXPECT_NO_THROW(RunConfig{}.Validate());
  WriteFile(dir / "c.json", R"({"seed": 3, "train": {"learning_rate": 0.01}})");
  const uint64_t seed = 11;
  const RunConfig c = LoadRunConfig(dir / "c.json", {"train.learning_rate=0.02", "ensemble.policy=threshold"}, &seed);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.02);
  EXPECT_EQ(c.ensemble.policy, "threshold");
  EXPECT_EQ(LoadRunConfig(dir / "c.json", {}, nullptr).seed, 3u);
  EXPECT_EQ(RunConfig::FromJson(c.ToJson()).ToJson(), c.ToJson());
}

TEST(RunConfigTest, ErrorsNameTheField) {
  const auto field_of = [](const std::vector<std::string>& sets) {
    try {
      LoadRunConfig({}, sets, nullptr);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<no error>");
  };
  EXPECT_EQ(field_of({"phantom.n_vs1=0"}), "phantom.n_vs1");
  EXPECT_EQ(field_of({"model.bogus=1"}), "model.bogus");
  EXPECT_EQ(field_of({"train.max_epochs=\"ten\""}), "train.max_epochs");
  EXPECT_EQ(field_of({"stats.gamma=1.5"}), "stats.gamma");
  EXPECT_EQ(field_of({"ensemble.top_k=40"}), "ensemble.top_k");
  EXPECT_EQ(field_of({"novalue"}), "--set");
  EXPECT_THROW(LoadRunConfig("/nonexistent/config.json", {}, nullptr), ConfigError);
}

TEST(RunConfigTest, SectionDigestTracksOnlyItsSections) {
  RunConfig a, b;
  b.eval.mc_passes = 7;
  EXPECT_EQ(a.SectionDigest({"model", "train"}), b.SectionDigest({"model", "train"}));
  EXPECT_NE(a.SectionDigest({"eval.mc_passes"}), b.SectionDigest({"eval.mc_passes"}));
  b = a;
  b.seed = 8;
  EXPECT_NE(a.SectionDigest({"model"}), b.SectionDigest({"model"}));
}

TEST(LedgerTest, RecordsInvalidateOnFileChange) {
  TempDir dir;
  WriteFile(dir / "a/x.txt", "hello");
  {
    Ledger ledger(dir.path());
    EXPECT_THROW(ledger.RequireInputs("b", {"a"}), StageOrderError);
    ledger.Record("a", "cfg1", {}, {"a/x.txt"});
  }
  Ledger ledger(dir.path());
  EXPECT_TRUE(ledger.UpToDate("a", "cfg1", {}));
  EXPECT_FALSE(ledger.UpToDate("a", "cfg2", {}));
  const auto inputs = ledger.RequireInputs("b", {"a"});
  EXPECT_EQ(inputs.at("a"), ledger.DigestFiles({"a/x.txt"}));
  WriteFile(dir / "a/x.txt", "changed");
  EXPECT_FALSE(ledger.UpToDate("a", "cfg1", {}));
  EXPECT_THROW(ledger.RequireInputs("b", {"a"}), StageOrderError);
  fs::remove(dir / "a/x.txt");
  EXPECT_EQ(ledger.DigestFiles({"a/x.txt"}), "");
}

TEST(CliTest, GenerateDataCreatesOutputDirectory) {
  TempDir scratch;
  Cli cli(scratch);
  const fs::path out = scratch / "nested/run";
  const RunResult r = cli.Stage("generate-data", out);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "data" / "manifest.json"));
  EXPECT_NE(r.out.find("manifest.json"), std::string::npos);
  const RunResult again = cli.Stage("generate-data", out);
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.err.find("up-to-date"), std::string::npos);
}

TEST(CliTest, InvalidConfigExitsTwoWithFieldPath) {
  TempDir scratch;
  Cli cli(scratch);
  const RunResult r = cli.Stage("generate-data", scratch / "run", "--set phantom.n_vs1=0");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("phantom.n_vs1"), std::string::npos) << r.err;
  EXPECT_EQ(cli.Run("no-such-command").code, 2);
  EXPECT_EQ(cli.Stage("generate-data", scratch / "run", "--threads 0").code, 2);
}

TEST(CliTest, SelectBeforeCandidatesExitsThree) {
  TempDir scratch;
  Cli cli(scratch);
  ASSERT_EQ(cli.Stage("generate-data", scratch / "run").code, 0);
  const RunResult r = cli.Stage("select", scratch / "run");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("stage order violation"), std::string::npos) << r.err;
}

TEST(CliTest, ReportOnEmptyRunExitsTwo) {
  TempDir scratch;
  Cli cli(scratch);
  fs::create_directories(scratch / "empty");
  EXPECT_EQ(cli.Stage("report", scratch / "empty").code, 2);
}

TEST(CliTest, DegeneratePoolsExitFour) {
  TempDir scratch;
  Cli cli(scratch);
  const fs::path run = scratch / "run";
  ASSERT_EQ(cli.Stage("generate-data", run).code, 0);
  // More neighbours than the ROI has pixels: the divergence cannot be formed.
  const RunResult r = cli.Stage("train-baseline", run, "--set divergence.k=5000");
  EXPECT_EQ(r.code, 4) << r.err;
  EXPECT_NE(r.err.find("degenerate"), std::string::npos) << r.err;
}

TEST(CliTest, FullPipelineResumeAndThreadIndependence) {
  TempDir scratch;
  Cli cli(scratch);
  const fs::path run = scratch / "run";
  cli.RunAll(run);
  ASSERT_FALSE(HasFatalFailure());

  const RunResult select = cli.Stage("select", run);
  EXPECT_EQ(select.code, 0);
  EXPECT_NE(select.err.find("up-to-date"), std::string::npos);
  int rows = 0;
  for (size_t pos = 0; (pos = select.out.find("\n", pos)) != std::string::npos; ++pos) ++rows;
  EXPECT_EQ(rows, 1 + 3 + 2);  // header, one row per candidate, policy and selection

  const std::string report = ReadFile(run / "report" / "report.md");
  EXPECT_NE(report.find("Delta (msunet - baseline)"), std::string::npos);
  EXPECT_NE(report.find("Config digest"), std::string::npos);
  EXPECT_NE(report.find("k = 4, alpha = 0.85, B = 20, gamma = 0.8"), std::string::npos) << report;
  const auto before = Snapshot(run);

  // Report regeneration is a no-op.
  EXPECT_EQ(cli.Stage("report", run).code, 0);
  EXPECT_EQ(Snapshot(run), before);

  // Deleting late-stage outputs and re-running reproduces them exactly.
  fs::remove(run / "eval" / "msunet" / "summary.json");
  fs::remove_all(run / "combiner");
  EXPECT_EQ(cli.Stage("evaluate", run).code, 3);
  for (const char* c : {"train-combiner", "evaluate", "report"}) {
    const RunResult r = cli.Stage(c, run);
    ASSERT_EQ(r.code, 0) << c << ": " << r.err;
  }
  EXPECT_EQ(Snapshot(run), before);

  // A fresh run with a different thread count writes the same bytes.
  const fs::path run3 = scratch / "run3";
  cli.RunAll(run3, "--threads 3");
  ASSERT_FALSE(HasFatalFailure());
  EXPECT_EQ(Snapshot(run3), before);
}

}  // namespace
}  // namespace msunet::cli
