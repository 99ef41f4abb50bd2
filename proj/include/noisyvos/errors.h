// SPDX-License-Identifier: Apache-2.0
#ifndef NOISYVOS_ERRORS_H_
#define NOISYVOS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace noisyvos {

// Malformed on-disk data (graymaps, state files, JSON documents).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structurally valid document that violates a data-model invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed an argument outside an operation's precondition.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training diverged or a run could not complete.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace noisyvos

#endif  // NOISYVOS_ERRORS_H_
