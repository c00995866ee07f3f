// Copyright 2026 The repreval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repreval {

enum class ErrorCode {
  // core-io
  BadMagic,
  BadHeader,
  ShapeMismatch,
  UnsupportedDtype,
  IoFailure,
  NonFiniteMetric,
  InvalidArgument,
  // synthgen
  EmptySpace,
  DimMismatch,
  NonPositiveSigma,
  TooManyObjects,
  // infotheory
  EmptyInput,
  NonPositiveVariance,
  // disent-metrics
  SingleFactorSpace,
  AllDimsPruned,
  InsufficientRepetition,
  // seg-metrics
  LengthMismatch,
  TooFewElements,
  NoForegroundPixels,
  EmptyUnion,
  NoForegroundMasks,
  // predictors
  NonFiniteLoss,
  EmptyTrainSet,
  WidthMismatch,
  UnsupportedKind,
  // matching
  NonFiniteCost,
  // ood-protocol
  InsufficientCardinality,
  MissingPredictor,
  // objectives
  NonPositiveBeta,
  NegativeCapacity,
  SingleSample,
  KOutOfRange,
  // cli
  UsageError,
  UnknownKey,
  TypeError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a module-qualified message, e.g. "seg-metrics: EmptyUnion: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& what)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace repreval
