// SPDX-License-Identifier: Apache-2.0
#include "noisyvos/rng.h"

#include "noisyvos/errors.h"

namespace noisyvos {

uint64_t Fnv1a64(std::string_view text) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Pcg32::Pcg32(uint64_t init_state, uint64_t init_sequence) {
  increment_ = (init_sequence << 1u) | 1u;
  NextU32();
  state_ += init_state;
  NextU32();
}

uint32_t Pcg32::NextU32() {
  const uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + increment_;
  const auto xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

double Pcg32::NextUniform01() {
  return static_cast<double>(NextU32()) * 0x1.0p-32;
}

uint32_t Pcg32::NextIndex(uint32_t n) {
  if (n == 0) throw ArgumentError("next_index: n must be >= 1");
  return static_cast<uint32_t>(NextUniform01() * static_cast<double>(n));
}

Pcg32 RngSubstream(uint64_t seed, std::string_view label) {
  return Pcg32(Fnv1a64(label) ^ seed);
}

}  // namespace noisyvos
