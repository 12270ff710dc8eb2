#ifndef MSUNET_TOOLS_LEDGER_H_
#define MSUNET_TOOLS_LEDGER_H_

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace msunet::cli {

// A stage's predecessor is missing or no longer matches its record.
class StageOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageRecord {
  std::string config_digest;
  std::map<std::string, std::string> inputs;  // predecessor stage -> output digest
  std::string output_digest;
  std::vector<std::string> files;  // relative to the workspace
};

// Per-workspace completion records (ledger.json). Output digests cover the
// bytes of every file a stage wrote, so deleting or editing an artifact
// invalidates the stage and everything downstream of it.
class Ledger {
 public:
  explicit Ledger(std::filesystem::path workspace);

  const std::filesystem::path& workspace() const { return workspace_; }

  // Digest of the files as they are on disk now; missing files yield "".
  std::string DigestFiles(const std::vector<std::string>& files) const;

  // Throws StageOrderError unless every predecessor has a record whose
  // files still match. Returns predecessor -> digest.
  std::map<std::string, std::string> RequireInputs(const std::string& stage,
                                                   const std::vector<std::string>& predecessors) const;

  // True when `stage` has a record with the same config and inputs and its
  // files are intact.
  bool UpToDate(const std::string& stage, const std::string& config_digest,
                const std::map<std::string, std::string>& inputs) const;

  bool Has(const std::string& stage) const { return records_.count(stage) != 0; }
  const StageRecord* Find(const std::string& stage) const;

  void Record(const std::string& stage, const std::string& config_digest,
              std::map<std::string, std::string> inputs, std::vector<std::string> files);

 private:
  void Save() const;

  std::filesystem::path workspace_;
  std::map<std::string, StageRecord> records_;
};

}  // namespace msunet::cli

#endif  // MSUNET_TOOLS_LEDGER_H_
