#include "ledger.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "msunet/digest.h"
#include "msunet/error.h"

namespace msunet::cli {

using nlohmann::json;

namespace {

constexpr const char* kLedgerFile = "ledger.json";

}  // namespace

Ledger::Ledger(std::filesystem::path workspace) : workspace_(std::move(workspace)) {
  const auto path = workspace_ / kLedgerFile;
  std::ifstream in(path);
  if (!in) return;
  std::stringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw IoError("corrupt ledger " + path.string());
  for (const auto& [stage, r] : j.at("stages").items()) {
    StageRecord rec;
    rec.config_digest = r.at("config_digest").get<std::string>();
    rec.inputs = r.at("inputs").get<std::map<std::string, std::string>>();
    rec.output_digest = r.at("output_digest").get<std::string>();
    rec.files = r.at("files").get<std::vector<std::string>>();
    records_[stage] = std::move(rec);
  }
}

std::string Ledger::DigestFiles(const std::vector<std::string>& files) const {
  std::vector<std::string> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  Digest d;
  for (const auto& f : sorted) {
    const auto path = workspace_ / f;
    if (!std::filesystem::is_regular_file(path)) return "";
    d.Update(f);
    d.Update("\0", 1);
    d.UpdateFile(path);
  }
  return d.Hex();
}

const StageRecord* Ledger::Find(const std::string& stage) const {
  const auto it = records_.find(stage);
  return it == records_.end() ? nullptr : &it->second;
}

std::map<std::string, std::string> Ledger::RequireInputs(
    const std::string& stage, const std::vector<std::string>& predecessors) const {
  std::map<std::string, std::string> inputs;
  for (const auto& p : predecessors) {
    const StageRecord* rec = Find(p);
    if (!rec) {
      throw StageOrderError("stage order violation: '" + stage + "' requires '" + p +
                            "', which has not run in this workspace");
    }
    if (DigestFiles(rec->files) != rec->output_digest) {
      throw StageOrderError("stage order violation: outputs of '" + p +
                            "' changed since it ran; re-run '" + p + "' before '" + stage + "'");
    }
    inputs[p] = rec->output_digest;
  }
  return inputs;
}

bool Ledger::UpToDate(const std::string& stage, const std::string& config_digest,
                      const std::map<std::string, std::string>& inputs) const {
  const StageRecord* rec = Find(stage);
  return rec && rec->config_digest == config_digest && rec->inputs == inputs &&
         DigestFiles(rec->files) == rec->output_digest;
}

void Ledger::Record(const std::string& stage, const std::string& config_digest,
                    std::map<std::string, std::string> inputs, std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  StageRecord rec;
  rec.config_digest = config_digest;
  rec.inputs = std::move(inputs);
  rec.output_digest = DigestFiles(files);
  rec.files = std::move(files);
  records_[stage] = std::move(rec);
  Save();
}

void Ledger::Save() const {
  json stages = json::object();
  for (const auto& [name, r] : records_) {
    stages[name] = {{"config_digest", r.config_digest},
                    {"inputs", r.inputs},
                    {"output_digest", r.output_digest},
                    {"files", r.files}};
  }
  const auto path = workspace_ / kLedgerFile;
  const auto tmp = workspace_ / (std::string(kLedgerFile) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << json{{"version", 1}, {"stages", stages}}.dump(2) << "\n";
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace msunet::cli
