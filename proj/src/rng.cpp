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

#include "kergo/rng.hpp"

#include <cmath>
#include <numbers>

namespace kergo {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

// 53-bit uniform strictly inside (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  std::uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3];
  std::uint32_t k0 = k[0], k1 = k[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
    const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
    const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
    c1 = static_cast<std::uint32_t>(p1);
    c3 = static_cast<std::uint32_t>(p0);
    c0 = n0;
    c2 = n2;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

CounterRng::CounterRng(std::uint64_t seed, StreamPurpose purpose) : seed_(seed) {
  const std::uint64_t mixed = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(purpose)));
  key_ = {static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)};
}

CounterRng CounterRng::split(std::uint64_t tag) const {
  const std::uint64_t base = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
  const std::uint64_t mixed = splitmix64(base ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
  return CounterRng(seed_, {static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)});
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t stream, std::uint64_t step,
                                               std::uint32_t slot) const {
  // Counter layout: slot | step (32 bits) | stream (64 bits).
  return philox4x32({slot, static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(stream),
                     static_cast<std::uint32_t>(stream >> 32) ^
                         static_cast<std::uint32_t>(step >> 32) * 0x9E3779B9u},
                    key_);
}

void CounterRng::normals(std::uint64_t stream, std::uint64_t step, std::span<double> out) const {
  std::size_t i = 0;
  for (std::uint32_t slot = 0; i < out.size(); ++slot) {
    const auto w = block(stream, step, slot);
    const double u1 = to_open_unit(w[0], w[1]);
    const double u2 = to_open_unit(w[2], w[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[i++] = radius * std::cos(angle);
    if (i < out.size()) out[i++] = radius * std::sin(angle);
  }
}

void CounterRng::uniforms(std::uint64_t stream, std::uint64_t step, std::span<double> out) const {
  std::size_t i = 0;
  for (std::uint32_t slot = 0; i < out.size(); ++slot) {
    const auto w = block(stream, step, slot);
    out[i++] = to_open_unit(w[0], w[1]);
    if (i < out.size()) out[i++] = to_open_unit(w[2], w[3]);
  }
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t step) const {
  double v = 0.0;
  normals(stream, step, {&v, 1});
  return v;
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t step) const {
  double v = 0.0;
  uniforms(stream, step, {&v, 1});
  return v;
}

}  // namespace kergo
