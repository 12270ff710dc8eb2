#ifndef MSUNET_TOOLS_PIPELINE_H_
#define MSUNET_TOOLS_PIPELINE_H_

#include <filesystem>
#include <string>
#include <vector>

#include "run_config.h"

namespace msunet::cli {

// Stage names as recorded in the ledger.
inline constexpr const char* kStageData = "data";
inline constexpr const char* kStageBaseline = "baseline";
inline constexpr const char* kStageCandidates = "candidates";
inline constexpr const char* kStageSelect = "select";
inline constexpr const char* kStageCombiner = "combiner";
inline constexpr const char* kStageReport = "report";

struct Context {
  RunConfig config;
  std::filesystem::path out;
  int threads = 1;
};

// Config sections a stage's outputs depend on.
std::vector<std::string> StageSections(const std::string& stage);

void GenerateData(const Context& ctx);
// Trains the single MC-dropout baseline, then evaluates it.
void TrainBaseline(const Context& ctx);
void TrainCandidates(const Context& ctx);
void Select(const Context& ctx);
void TrainCombiner(const Context& ctx);
// which: baseline, msunet or both.
void Evaluate(const Context& ctx, const std::string& which);
void Report(const Context& ctx);

}  // namespace msunet::cli

#endif  // MSUNET_TOOLS_PIPELINE_H_
