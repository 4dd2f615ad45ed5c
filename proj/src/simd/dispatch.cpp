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

#include <atomic>
#include <cstdlib>
#include <string>

#include "gpcis/simd/kernels.hpp"

namespace gpcis::simd {

#if defined(GPCIS_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(GPCIS_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* resolve(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "auto" || name.empty()) {
    const KernelTable* best = avx2_table();
    return best != nullptr ? best : &scalar_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table = [] {
    const char* env = std::getenv("GPCIS_SIMD");
    const KernelTable* chosen = resolve(env != nullptr ? std::string_view(env) : std::string_view("auto"));
    return chosen != nullptr ? chosen : resolve("auto");
  }();
  return table;
}

}  // namespace

const KernelTable& active_table() { return *current().load(std::memory_order_acquire); }

bool select_table(std::string_view name) {
  const KernelTable* table = resolve(name);
  if (table == nullptr) return false;
  current().store(table, std::memory_order_release);
  return true;
}

}  // namespace gpcis::simd
