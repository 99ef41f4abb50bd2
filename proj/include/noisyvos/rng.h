// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_RNG_H_
#define NOISYVOS_RNG_H_

#include <cstdint>
#include <string_view>

namespace noisyvos {

// 64-bit FNV-1a over the bytes of `text`.
uint64_t Fnv1a64(std::string_view text);

// PCG32 (XSH-RR, 64-bit state, 32-bit output).
//
// Every consumer documents its draw order so that corrupted corpora and
// training runs are bit-reproducible. Single owner; parallel callers derive
// independent substreams instead of sharing one generator.
class Pcg32 {
 public:
  // Stream selector used for all substreams.
  static constexpr uint64_t kDefaultSequence = 54;

  Pcg32(uint64_t init_state, uint64_t init_sequence = kDefaultSequence);

  uint32_t NextU32();
  // next_u32 / 2^32, in [0, 1).
  double NextUniform01();
  // floor(uniform01 * n); throws ArgumentError for n == 0.
  uint32_t NextIndex(uint32_t n);

  uint64_t state() const { return state_; }
  uint64_t increment() const { return increment_; }

 private:
  uint64_t state_ = 0;
  uint64_t increment_ = 0;
};

// Generator for (seed, label): initial state FNV-1a-64(label) XOR seed.
Pcg32 RngSubstream(uint64_t seed, std::string_view label);

}  // namespace noisyvos

#endif  // NOISYVOS_RNG_H_
