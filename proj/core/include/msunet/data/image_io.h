#ifndef MSUNET_DATA_IMAGE_IO_H_
#define MSUNET_DATA_IMAGE_IO_H_

#include <filesystem>
#include <string>

#include "msunet/error.h"
#include "msunet/tensor.h"

namespace msunet::data {

enum class ImageIoErrorKind {
  kOpenFailed,
  kUnsupportedMagic,
  kMalformedHeader,
  kTruncatedPayload,
  kWriteFailed,
};

class ImageIoError : public IoError {
 public:
  ImageIoError(ImageIoErrorKind kind, const std::filesystem::path& path, const std::string& what);
  ImageIoErrorKind kind() const { return kind_; }

 private:
  ImageIoErrorKind kind_;
};

const char* ToString(ImageIoErrorKind kind);

// 8-bit grayscale (P5, maxval 255). Values in [0,1] are scaled by 255 and
// rounded; a {0,1} mask is written as bytes {0,255}.
void WritePgm(const std::filesystem::path& path, const Tensor& image);
Tensor ReadPgm(const std::filesystem::path& path);

// Single-channel float map ("Pf", scale -1.0 => little-endian). Lossless.
// Rows are stored bottom-to-top as the format requires.
void WritePfm(const std::filesystem::path& path, const Tensor& map);
Tensor ReadPfm(const std::filesystem::path& path);

// Dispatches on the file's magic number.
Tensor ReadImage(const std::filesystem::path& path);

}  // namespace msunet::data

#endif  // MSUNET_DATA_IMAGE_IO_H_
