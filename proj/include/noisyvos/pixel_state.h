// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_PIXEL_STATE_H_
#define NOISYVOS_PIXEL_STATE_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "noisyvos/grid.h"

namespace noisyvos {

// Binary array files: 8-byte magic, little-endian uint32 width, height and
// channel count, then channel-major, row-major 32-bit values (IEEE-754
// float or uint32, little-endian).
using FileMagic = std::array<char, 8>;

inline constexpr FileMagic kProbabilityMagic = {'N', 'V', 'P', 'R', 'O', 'B', '0', '1'};
inline constexpr FileMagic kElrStateMagic = {'N', 'V', 'E', 'L', 'R', 'S', '0', '1'};
inline constexpr FileMagic kNpnStateMagic = {'N', 'V', 'N', 'P', 'N', 'C', '0', '1'};

struct FloatArray {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;
};

struct CountArray {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint32_t> values;
};

std::string EncodeFloatArray(const FileMagic& magic, const FloatArray& array);
FloatArray DecodeFloatArray(const FileMagic& magic, const std::string& bytes);
std::string EncodeCountArray(const FileMagic& magic, const CountArray& array);
CountArray DecodeCountArray(const FileMagic& magic, const std::string& bytes);

// Probability maps are stored at single precision.
void WriteProbabilityMap(const ProbabilityMap& map, const std::filesystem::path& path);
ProbabilityMap ReadProbabilityMap(const std::filesystem::path& path);

}  // namespace noisyvos

#endif  // NOISYVOS_PIXEL_STATE_H_
