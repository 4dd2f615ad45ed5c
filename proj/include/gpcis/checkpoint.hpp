// Copyright 2026 The GPCIS Authors.
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
#include <filesystem>
#include <span>
#include <vector>

#include "gpcis/model.hpp"

namespace gpcis {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "GPIS", u32 version, u64 header length, JSON header, then the
// tensors as little-endian float32, each row-major, at the offsets the
// header lists. Parameters are stored as float32; values that are not exactly
// representable are rounded.
std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& model);
ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelCheckpoint& model, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gpcis
