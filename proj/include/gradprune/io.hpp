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

#ifndef GRADPRUNE_IO_HPP_
#define GRADPRUNE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gradprune {

// Writes `contents` to a sibling temp file and renames it over `path`, so a
// reader never observes a partially written file. Creates parent dirs.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// 64-bit FNV-1a, stable across platforms; used for cache keys.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace gradprune

#endif  // GRADPRUNE_IO_HPP_
