#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ledger.h"
#include "msunet/error.h"
#include "pipeline.h"
#include "run_config.h"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kStageOrder = 3, kDegenerate = 4 };

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string out = "msunet-run";
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON configuration file");
  cmd->add_option("--set", f.sets, "Override a configuration value (dotted.key=value)")->take_all();
  cmd->add_option_function<uint64_t>(
      "--seed", [&f](const uint64_t& s) { f.seed = s; f.seed_given = true; }, "Master seed");
  cmd->add_option("--threads", f.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1, 256));
  cmd->add_option("--out", f.out, "Workspace directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multistage Monte-Carlo-dropout ensemble segmentation pipeline"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string model = "both";

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"generate-data", "Render the synthetic phantom dataset"},
      {"train-baseline", "Train and evaluate the single MC-dropout baseline"},
      {"train-candidates", "Train the bagged ensemble candidates"},
      {"select", "Select decorrelated members on VS2"},
      {"train-combiner", "Train the combiner on member outputs"},
      {"evaluate", "MC inference, metrics and uncertainty analysis on the test split"},
      {"report", "Write the consolidated run report"},
  };
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    AddCommon(sub, flags);
    if (std::string(c.name) == "evaluate") {
      sub->add_option("--model", model, "baseline, msunet or both")
          ->check(CLI::IsMember({"baseline", "msunet", "both"}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    msunet::cli::Context ctx;
    ctx.config = msunet::cli::LoadRunConfig(flags.config, flags.sets,
                                            flags.seed_given ? &flags.seed : nullptr);
    ctx.out = flags.out;
    ctx.threads = flags.threads;

    if (command == "generate-data") {
      msunet::cli::GenerateData(ctx);
    } else if (command == "train-baseline") {
      msunet::cli::TrainBaseline(ctx);
    } else if (command == "train-candidates") {
      msunet::cli::TrainCandidates(ctx);
    } else if (command == "select") {
      msunet::cli::Select(ctx);
    } else if (command == "train-combiner") {
      msunet::cli::TrainCombiner(ctx);
    } else if (command == "evaluate") {
      msunet::cli::Evaluate(ctx, model);
    } else {
      msunet::cli::Report(ctx);
    }
  } catch (const msunet::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const msunet::cli::StageOrderError& e) {
    fmt::print(stderr, "{}\n", e.what());
    return kStageOrder;
  } catch (const msunet::DegenerateInputError& e) {
    fmt::print(stderr, "evaluation error: {}\n", e.what());
    return kDegenerate;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
  return kOk;
}
