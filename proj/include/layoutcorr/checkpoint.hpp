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

// Binary tensor container shared by denoiser and corrector checkpoints.
//
// Layout (little-endian):
//   char[4]  magic "LCKP"
//   u32      format version (2; version 1 files have no meta string)
//   u32 + n  kind tag ("denoiser" / "corrector")
//   u32 + n  config JSON
//   u32 + n  meta JSON (provenance, schedule; "null" when absent)
//   u32      tensor count
//   per tensor: u32 + n name, u32 rows, u32 cols, rows*cols f32 (row-major)

#include <string>

#include "json.hpp"
#include "layoutcorr/nn.hpp"

namespace layoutcorr {

inline constexpr std::uint32_t kCheckpointVersion = 2;

struct CheckpointHeader {
  std::string kind;
  nlohmann::json config;
  nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& config,
                     const nn::ParamSet<float>& params, const nlohmann::json& meta = nullptr);

// Reads only the header, for constructing the model before load_checkpoint.
CheckpointHeader read_checkpoint_header(const std::string& path);

// Fills `params` by name. Every stored tensor must exist with matching shape
// and every parameter must be present in the file.
CheckpointHeader load_checkpoint(const std::string& path, const std::string& expected_kind,
                                 nn::ParamSet<float>& params);

}  // namespace layoutcorr
