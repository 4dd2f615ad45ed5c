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

#include <array>
#include <cstdint>
#include <span>

namespace gpcis {

// Philox4x32-10 counter-based generator (Salmon et al., Random123). Every
// output block is a pure function of (key, counter), so streams can be split
// by seed and sub-stream id without shared state.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block bijection(Block counter, Key key);
};

// Sequential view over one Philox stream identified by (seed, stream id).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  void fill_normal(std::span<double> out);

 private:
  void refill();

  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Philox4x32::Block buffer_{};
  int cursor_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Derives an independent child seed; used to give each stochastic
// sub-operation of a call its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace gpcis
