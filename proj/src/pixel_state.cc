// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/pixel_state.h"

#include <bit>
#include <cstring>

#include "noisyvos/errors.h"
#include "noisyvos/pnm.h"

namespace noisyvos {
namespace {

constexpr std::size_t kHeaderBytes = 8 + 3 * 4;

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

uint32_t GetU32(const std::string& bytes, std::size_t offset) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return v;
}

template <typename T>
std::string Encode(const FileMagic& magic, int width, int height, int channels,
                   const std::vector<T>& values) {
  if (width < 0 || height < 0 || channels < 0 ||
      values.size() != static_cast<std::size_t>(width) * height * channels) {
    throw ArgumentError("array file: value count does not match dimensions");
  }
  std::string out(magic.begin(), magic.end());
  PutU32(out, static_cast<uint32_t>(width));
  PutU32(out, static_cast<uint32_t>(height));
  PutU32(out, static_cast<uint32_t>(channels));
  out.reserve(out.size() + 4 * values.size());
  for (T v : values) PutU32(out, std::bit_cast<uint32_t>(v));
  return out;
}

template <typename T>
void Decode(const FileMagic& magic, const std::string& bytes, int& width, int& height,
            int& channels, std::vector<T>& values) {
  if (bytes.size() < kHeaderBytes) throw FormatError("array file: truncated 'header'");
  if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
    throw FormatError("array file: field 'magic' mismatch, expected " +
                      std::string(magic.begin(), magic.end()));
  }
  width = static_cast<int>(GetU32(bytes, 8));
  height = static_cast<int>(GetU32(bytes, 12));
  channels = static_cast<int>(GetU32(bytes, 16));
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() != kHeaderBytes + 4 * count) {
    throw FormatError("array file: 'payload' size does not match dimensions");
  }
  values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<T>(GetU32(bytes, kHeaderBytes + 4 * i));
  }
}

}  // namespace

std::string EncodeFloatArray(const FileMagic& magic, const FloatArray& array) {
  return Encode(magic, array.width, array.height, array.channels, array.values);
}

FloatArray DecodeFloatArray(const FileMagic& magic, const std::string& bytes) {
  FloatArray array;
  Decode(magic, bytes, array.width, array.height, array.channels, array.values);
  return array;
}

std::string EncodeCountArray(const FileMagic& magic, const CountArray& array) {
  return Encode(magic, array.width, array.height, array.channels, array.values);
}

CountArray DecodeCountArray(const FileMagic& magic, const std::string& bytes) {
  CountArray array;
  Decode(magic, bytes, array.width, array.height, array.channels, array.values);
  return array;
}

void WriteProbabilityMap(const ProbabilityMap& map, const std::filesystem::path& path) {
  FloatArray array{map.width, map.height, 1, {}};
  array.values.reserve(map.size());
  for (double p : map.values) array.values.push_back(static_cast<float>(p));
  WriteFileBytes(path, EncodeFloatArray(kProbabilityMagic, array));
}

ProbabilityMap ReadProbabilityMap(const std::filesystem::path& path) {
  FloatArray array;
  try {
    array = DecodeFloatArray(kProbabilityMagic, ReadFileBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (array.channels != 1) throw FormatError(path.string() + ": expected one channel");
  ProbabilityMap map(array.width, array.height);
  for (std::size_t i = 0; i < map.size(); ++i) map.values[i] = array.values[i];
  return map;
}

}  // namespace noisyvos
