// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace layoutcorr {

inline constexpr const char* kVersion = "0.3.2";

using Token = std::int32_t;

enum class Errc {
  kTooManyElements,
  kOutOfRange,
  kResidualMask,
  kMixedPad,
  kIllegalToken,
  kMaskInput,
  kInfeasibleProfile,
  kZeroProbability,
  kUnnormalized,
  kStepOvershoot,
  kNonFinite,
  kDivergence,
  kParse,
  kInsufficientSamples,
  kNotPsd,
  kEmptySplit,
  kIo,
  kConfig,
  kIncompatible,
  kInvalidArgument,
};

const char* errc_name(Errc code);

// All recoverable failures in the library are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace layoutcorr
