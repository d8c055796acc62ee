// Copyright 2026 The milrw Authors.
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
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace milrw {

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Combines a seed with a string key, e.g. (config seed, request id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) {
  return splitmix64(seed ^ fnv1a64(key));
}

// Maps a hash to [0, 1) using the top 53 bits.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Platform-stable RNG. std::mt19937_64's output sequence is fixed by the
// standard, but the std distributions are not, so conversions live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return unit_interval(engine_()); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace milrw
