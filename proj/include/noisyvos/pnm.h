// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_PNM_H_
#define NOISYVOS_PNM_H_

#include <filesystem>
#include <string>

#include "noisyvos/grid.h"

namespace noisyvos {

// Label masks are binary portable graymaps ("P5") with maxval 65535 and
// big-endian 16-bit samples. Output is canonical: "P5 W H 65535\n" + payload.
LabelMask ReadMask(const std::filesystem::path& path);
void WriteMask(const LabelMask& mask, const std::filesystem::path& path);

LabelMask DecodeMask(const std::string& bytes);
std::string EncodeMask(const LabelMask& mask);

// Frames are binary portable pixmaps ("P6") with maxval 255.
RgbImage ReadImage(const std::filesystem::path& path);
void WriteImage(const RgbImage& image, const std::filesystem::path& path);

// Whole-file helpers shared by the other on-disk formats.
std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace noisyvos

#endif  // NOISYVOS_PNM_H_
