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

#ifndef GRADPRUNE_CHECKPOINT_HPP_
#define GRADPRUNE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "gradprune/model.hpp"

namespace gradprune {

// Versioned little-endian binary checkpoint. Layout (docs/checkpoint_format.md):
//
//   magic     8 bytes  "GPRUNECK"
//   version   u32      kCheckpointVersion
//   arch      u32 length + UTF-8 bytes
//   classes   u32
//   input     u32 channels, u32 height, u32 width
//   seed      u64
//   params    u32 count, then per tensor: u32 name length + bytes,
//             u32 rank, rank x u32 dims
//   body      f64 values of every tensor, declaration order, row-major
//   mask      u32 count, then (u32 conv layer, u32 filter) pairs, ascending
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'G', 'P', 'R', 'U',
                                             'N', 'E', 'C', 'K'};

std::string serialize_model(const Model& model);
// Throws VersionError on bad magic/version and PersistenceError on any
// truncation or shape disagreement. Never returns a partial model.
Model deserialize_model(const std::string& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace gradprune

#endif  // GRADPRUNE_CHECKPOINT_HPP_
