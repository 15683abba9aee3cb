/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace hcnn {

// Base of every error thrown by the library. exit_code() is the process exit
// status the CLI reports: 1 for internal failures, 2 for bad input/config.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// corpus
struct MalformedXml : InputError { using InputError::InputError; };
struct MissingField : InputError { using InputError::InputError; };
struct MalformedCode : InputError { using InputError::InputError; };
struct DuplicateId : InputError { using InputError::InputError; };
struct EmptySelection : InputError { using InputError::InputError; };

// textprep
struct EmptyCorpus : InputError { using InputError::InputError; };

// nn / textcnn
struct IndexOutOfRange : Error { using Error::Error; };
struct DocumentTooShort : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct InvalidConfig : InputError { using InputError::InputError; };
struct EmptySplit : InputError { using InputError::InputError; };
struct LabelOutOfRange : InputError { using InputError::InputError; };
struct CheckpointError : InputError { using InputError::InputError; };

// hierarchy
struct DegenerateDistribution : InputError { using InputError::InputError; };
struct EmptyGroupSplit : InputError { using InputError::InputError; };
struct InvalidPartition : InputError { using InputError::InputError; };

// eval
struct ClassTooSmall : InputError { using InputError::InputError; };
struct UnknownLabel : InputError { using InputError::InputError; };
struct MismatchedTestSets : InputError { using InputError::InputError; };

// synth / cli
struct InvalidSpec : InputError { using InputError::InputError; };
struct MismatchedPreprocessing : InputError { using InputError::InputError; };
struct IoError : InputError { using InputError::InputError; };

}  // namespace hcnn
