// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kergo/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace kergo {

namespace {
std::atomic<std::size_t> override_count{0};
}

void set_worker_count(std::size_t n) { override_count.store(n); }

std::size_t worker_count() {
  if (const std::size_t forced = override_count.load()) return forced;
  static const std::size_t count = [] {
    if (const char* env = std::getenv("KERGO_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<std::size_t>(hw == 0 ? 1 : hw);
  }();
  return count;
}

}  // namespace kergo
