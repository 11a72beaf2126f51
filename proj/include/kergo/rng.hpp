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

#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace kergo {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to derive independent keys.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Purpose tags keep streams used for different jobs disjoint.
enum class StreamPurpose : std::uint64_t {
  kNoise = 1,
  kInitial = 2,
  kSampling = 3,
  kReference = 4,
  kProbe = 5,
};

/// Counter-based generator keyed by (seed, purpose). Every draw is a pure
/// function of (seed, purpose, stream, step, slot), so results never depend
/// on thread count or call order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, StreamPurpose purpose = StreamPurpose::kNoise);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Fills `out` with standard normals for (stream, step).
  void normals(std::uint64_t stream, std::uint64_t step, std::span<double> out) const;
  /// Fills `out` with uniforms in the open interval (0, 1).
  void uniforms(std::uint64_t stream, std::uint64_t step, std::span<double> out) const;

  double normal(std::uint64_t stream, std::uint64_t step) const;
  double uniform(std::uint64_t stream, std::uint64_t step) const;

  /// Child generator with an independent key.
  CounterRng split(std::uint64_t tag) const;

 private:
  CounterRng(std::uint64_t seed, std::array<std::uint32_t, 2> key) : seed_(seed), key_(key) {}
  std::array<std::uint32_t, 4> block(std::uint64_t stream, std::uint64_t step,
                                     std::uint32_t slot) const;

  std::uint64_t seed_;
  std::array<std::uint32_t, 2> key_;
};

/// Sequential adaptor over one (stream) of a CounterRng; convenient for
/// setup code that draws an unknown number of variates.
class RngCursor {
 public:
  RngCursor(const CounterRng& rng, std::uint64_t stream) : rng_(rng), stream_(stream) {}
  double normal() { return rng_.normal(stream_, next_++); }
  double uniform() { return rng_.uniform(stream_, next_++); }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint64_t next_ = 0;
};

}  // namespace kergo
