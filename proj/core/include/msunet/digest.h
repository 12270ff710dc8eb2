#ifndef MSUNET_DIGEST_H_
#define MSUNET_DIGEST_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace msunet {

// Incremental 64-bit FNV-1a. Used for artifact and config digests; not a
// cryptographic hash.
class Digest {
 public:
  Digest& Update(std::string_view bytes);
  Digest& Update(const void* data, size_t size);
  Digest& UpdateFile(const std::filesystem::path& path);
  uint64_t value() const { return state_; }
  std::string Hex() const;

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string DigestHex(std::string_view bytes);

}  // namespace msunet

#endif  // MSUNET_DIGEST_H_
