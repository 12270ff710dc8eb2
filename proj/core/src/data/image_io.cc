#include "msunet/data/image_io.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace msunet::data {
namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

std::vector<unsigned char> Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError(ImageIoErrorKind::kOpenFailed, path, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Minimal netpbm header tokenizer: whitespace separated, '#' comments.
class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string Token() {
    SkipSpaceAndComments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) tok += static_cast<char>(bytes_[pos_++]);
    if (tok.empty()) throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path_, "unexpected end of header");
    return tok;
  }

  int PositiveInt() {
    const std::string tok = Token();
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path_, "expected integer, got '" + tok + "'");
    }
    long v = std::stol(tok);
    if (v <= 0 || v > (1 << 20)) {
      throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path_, "dimension out of range: " + tok);
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates the header from the raster.
  size_t PayloadOffset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path_, "missing separator before payload");
    }
    return pos_ + 1;
  }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<unsigned char>& bytes_;
  const std::filesystem::path& path_;
  size_t pos_ = 0;
};

void RequireMagic(const std::vector<unsigned char>& bytes, const char* magic,
                  const std::filesystem::path& path) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw ImageIoError(ImageIoErrorKind::kUnsupportedMagic, path,
                       std::string("expected magic ") + magic);
  }
}

void Require2d(const Tensor& t, const std::filesystem::path& path) {
  if (t.rank() != 2) {
    throw ImageIoError(ImageIoErrorKind::kWriteFailed, path,
                       "expected a 2-D tensor, got " + ShapeString(t.shape()));
  }
}

void WriteBytes(const std::filesystem::path& path, const std::string& header,
                const void* payload, size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError(ImageIoErrorKind::kWriteFailed, path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(size));
  if (!out) throw ImageIoError(ImageIoErrorKind::kWriteFailed, path, "write failed");
}

}  // namespace

ImageIoError::ImageIoError(ImageIoErrorKind kind, const std::filesystem::path& path,
                           const std::string& what)
    : IoError(path.string() + ": " + ToString(kind) + ": " + what), kind_(kind) {}

const char* ToString(ImageIoErrorKind kind) {
  switch (kind) {
    case ImageIoErrorKind::kOpenFailed: return "open failed";
    case ImageIoErrorKind::kUnsupportedMagic: return "unsupported magic";
    case ImageIoErrorKind::kMalformedHeader: return "malformed header";
    case ImageIoErrorKind::kTruncatedPayload: return "truncated payload";
    case ImageIoErrorKind::kWriteFailed: return "write failed";
  }
  return "unknown";
}

void WritePgm(const std::filesystem::path& path, const Tensor& image) {
  Require2d(image, path);
  const int h = image.dim(0), w = image.dim(1);
  std::vector<unsigned char> raster(image.size());
  for (size_t i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    raster[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  WriteBytes(path, "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n",
             raster.data(), raster.size());
}

Tensor ReadPgm(const std::filesystem::path& path) {
  const auto bytes = Slurp(path);
  RequireMagic(bytes, "P5", path);
  HeaderReader header(bytes, path);
  header.Token();
  const int w = header.PositiveInt();
  const int h = header.PositiveInt();
  const int maxval = header.PositiveInt();
  if (maxval != 255) {
    throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path, "only maxval 255 is supported");
  }
  const size_t offset = header.PayloadOffset();
  const size_t n = static_cast<size_t>(w) * h;
  if (bytes.size() < offset + n) {
    throw ImageIoError(ImageIoErrorKind::kTruncatedPayload, path,
                       "expected " + std::to_string(n) + " bytes");
  }
  Tensor out({h, w});
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<float>(bytes[offset + i]) / 255.0f;
  return out;
}

void WritePfm(const std::filesystem::path& path, const Tensor& map) {
  Require2d(map, path);
  const int h = map.dim(0), w = map.dim(1);
  std::vector<float> raster(map.size());
  for (int y = 0; y < h; ++y) {
    std::memcpy(&raster[static_cast<size_t>(h - 1 - y) * w], map.data() + static_cast<size_t>(y) * w,
                sizeof(float) * w);
  }
  WriteBytes(path, "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n",
             raster.data(), raster.size() * sizeof(float));
}

Tensor ReadPfm(const std::filesystem::path& path) {
  const auto bytes = Slurp(path);
  RequireMagic(bytes, "Pf", path);
  HeaderReader header(bytes, path);
  header.Token();
  const int w = header.PositiveInt();
  const int h = header.PositiveInt();
  const std::string scale_tok = header.Token();
  double scale = 0.0;
  try {
    size_t used = 0;
    scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument(scale_tok);
  } catch (const std::exception&) {
    throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path, "bad scale '" + scale_tok + "'");
  }
  if (scale >= 0.0) {
    throw ImageIoError(ImageIoErrorKind::kMalformedHeader, path, "big-endian PFM is not supported");
  }
  const size_t offset = header.PayloadOffset();
  const size_t n = static_cast<size_t>(w) * h;
  if (bytes.size() < offset + n * sizeof(float)) {
    throw ImageIoError(ImageIoErrorKind::kTruncatedPayload, path,
                       "expected " + std::to_string(n * sizeof(float)) + " payload bytes");
  }
  Tensor out({h, w});
  for (int y = 0; y < h; ++y) {
    std::memcpy(out.data() + static_cast<size_t>(y) * w,
                bytes.data() + offset + static_cast<size_t>(h - 1 - y) * w * sizeof(float),
                sizeof(float) * w);
  }
  return out;
}

Tensor ReadImage(const std::filesystem::path& path) {
  const auto bytes = Slurp(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return ReadPgm(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == 'f') return ReadPfm(path);
  throw ImageIoError(ImageIoErrorKind::kUnsupportedMagic, path, "neither P5 nor Pf");
}

}  // namespace msunet::data
