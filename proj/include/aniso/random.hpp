//
// Copyright 2026 The Aniso Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Counter-based random numbers (Philox4x32-10).
//
// A draw is a pure function of (seed, stream, step, index), so results do not
// depend on evaluation order or on how work is split across threads.

#ifndef ANISO_RANDOM_HPP_
#define ANISO_RANDOM_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace aniso {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

namespace internal {

inline Philox4x32::Counter philox_block(std::uint64_t seed,
                                        std::uint64_t stream,
                                        std::uint64_t step,
                                        std::uint64_t pair) {
  return Philox4x32::generate(
      {static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(step),
       static_cast<std::uint32_t>(step >> 32),
       static_cast<std::uint32_t>(stream)},
      {static_cast<std::uint32_t>(seed),
       static_cast<std::uint32_t>(seed >> 32)});
}

// 53 random bits mapped into the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace internal

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Mixes a seed with a list of integer tags into an independent sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632BE59BD9B4E019ull));
  return h;
}

inline double uniform_open01(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t step, std::uint64_t index) {
  const auto block = internal::philox_block(seed, stream, step, index >> 1);
  return (index & 1) ? internal::to_open_unit(block[2], block[3])
                     : internal::to_open_unit(block[0], block[1]);
}

// Box-Muller on one Philox block; even/odd indices take the cosine/sine leg.
inline double standard_normal(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t step, std::uint64_t index) {
  const auto block = internal::philox_block(seed, stream, step, index >> 1);
  const double u1 = internal::to_open_unit(block[0], block[1]);
  const double u2 = internal::to_open_unit(block[2], block[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return (index & 1) ? r * std::sin(theta) : r * std::cos(theta);
}

}  // namespace aniso

#endif  // ANISO_RANDOM_HPP_
