// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/pnm.h"

#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace noisyvos {
namespace {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t payload_offset = 0;
};

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string Token(const char* field) {
    SkipSpaceAndComments();
    std::string token;
    while (pos_ < bytes_.size() &&
           !std::isspace(static_cast<unsigned char>(bytes_[pos_])) &&
           bytes_[pos_] != '#') {
      token.push_back(bytes_[pos_++]);
    }
    if (token.empty()) {
      throw FormatError(std::string("pnm: missing header field '") + field + "'");
    }
    return token;
  }

  int Integer(const char* field) {
    const std::string token = Token(field);
    for (char c : token) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        throw FormatError(std::string("pnm: header field '") + field +
                          "' is not a non-negative integer: " + token);
      }
    }
    if (token.size() > 9) {
      throw FormatError(std::string("pnm: header field '") + field + "' too large");
    }
    return std::stoi(token);
  }

  // Exactly one whitespace byte separates maxval from the payload.
  std::size_t PayloadStart() {
    if (pos_ >= bytes_.size() ||
        !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw FormatError("pnm: missing whitespace after 'maxval'");
    }
    return pos_ + 1;
  }

 private:
  void SkipSpaceAndComments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

PnmHeader ParseHeader(const std::string& bytes, const char* expected_magic) {
  HeaderReader reader(bytes);
  PnmHeader header;
  header.magic = reader.Token("magic");
  if (header.magic != expected_magic) {
    throw FormatError("pnm: field 'magic' is '" + header.magic + "', expected " +
                      expected_magic);
  }
  header.width = reader.Integer("width");
  header.height = reader.Integer("height");
  if (header.width <= 0 || header.height <= 0) {
    throw FormatError("pnm: fields 'width'/'height' must be positive");
  }
  header.maxval = reader.Integer("maxval");
  header.payload_offset = reader.PayloadStart();
  return header;
}

}  // namespace

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LabelMask DecodeMask(const std::string& bytes) {
  const PnmHeader header = ParseHeader(bytes, "P5");
  if (header.maxval != 65535) {
    throw FormatError("pnm: field 'maxval' is " + std::to_string(header.maxval) +
                      ", expected 65535");
  }
  const std::size_t count = static_cast<std::size_t>(header.width) * header.height;
  if (bytes.size() - header.payload_offset < 2 * count) {
    throw FormatError("pnm: truncated 'payload', expected " +
                      std::to_string(2 * count) + " bytes");
  }
  LabelMask mask(header.width, header.height);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + header.payload_offset);
  for (std::size_t i = 0; i < count; ++i) {
    mask.values[i] = static_cast<uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
  }
  return mask;
}

std::string EncodeMask(const LabelMask& mask) {
  if (mask.width <= 0 || mask.height <= 0) {
    throw ArgumentError("write_mask: dimensions must be positive");
  }
  std::string out = "P5 " + std::to_string(mask.width) + " " +
                    std::to_string(mask.height) + " 65535\n";
  out.reserve(out.size() + 2 * mask.size());
  for (uint16_t v : mask.values) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

LabelMask ReadMask(const std::filesystem::path& path) {
  try {
    return DecodeMask(ReadFileBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void WriteMask(const LabelMask& mask, const std::filesystem::path& path) {
  WriteFileBytes(path, EncodeMask(mask));
}

RgbImage ReadImage(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  const PnmHeader header = ParseHeader(bytes, "P6");
  if (header.maxval != 255) {
    throw FormatError(path.string() + ": pnm field 'maxval' is " +
                      std::to_string(header.maxval) + ", expected 255");
  }
  RgbImage image(header.width, header.height);
  if (bytes.size() - header.payload_offset < image.rgb.size()) {
    throw FormatError(path.string() + ": truncated 'payload'");
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(header.payload_offset),
              image.rgb.size(), image.rgb.begin());
  return image;
}

void WriteImage(const RgbImage& image, const std::filesystem::path& path) {
  std::string out = "P6 " + std::to_string(image.width) + " " +
                    std::to_string(image.height) + " 255\n";
  out.append(image.rgb.begin(), image.rgb.end());
  WriteFileBytes(path, out);
}

}  // namespace noisyvos
