#include "msunet/digest.h"

#include <array>
#include <cstdio>
#include <fstream>

#include "msunet/error.h"

namespace msunet {

Digest& Digest::Update(const void* data, size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

Digest& Digest::Update(std::string_view bytes) {
  return Update(bytes.data(), bytes.size());
}

Digest& Digest::UpdateFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    Update(buf.data(), static_cast<size_t>(in.gcount()));
  }
  return *this;
}

std::string Digest::Hex() const {
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(state_));
  return out;
}

std::string DigestHex(std::string_view bytes) { return Digest().Update(bytes).Hex(); }

}  // namespace msunet
