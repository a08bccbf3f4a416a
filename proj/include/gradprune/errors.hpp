/* Copyright 2026 The GradPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef GRADPRUNE_ERRORS_HPP_
#define GRADPRUNE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace gradprune {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at once, or a specific category when they care.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or axes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument is outside its documented domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or other on-disk artifact could not be written or read back.
class PersistenceError : public Error {
 public:
  using Error::Error;
};

// Checkpoint header carries the wrong magic or an unsupported version.
class VersionError : public PersistenceError {
 public:
  using PersistenceError::PersistenceError;
};

// Dataset file is malformed (bad magic, truncated payload).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Two related inputs disagree with each other, e.g. image and label counts.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Not enough data to satisfy a sampling request.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradprune

#endif  // GRADPRUNE_ERRORS_HPP_
