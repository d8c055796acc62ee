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

// Shared test helpers and independent oracles. Nothing here calls into the
// code under test except where noted.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <unistd.h>
#include <sstream>
#include <string>
#include <vector>

#include "milrw/error.hpp"

namespace milrw::testing {

// Runs fn and returns the error it threw; nullopt when it returned normally.
template <typename Fn>
std::optional<milrw::Errc> error_code(Fn&& fn) {
  try {
    fn();
  } catch (const milrw::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(MILRW_SOURCE_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("milrw-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Textbook O(n*m) longest common subsequence.
inline std::size_t lcs_dp(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

// U by direct pair counting (ties count one half).
inline double u_by_pairs(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

struct BruteMww {
  double u = 0;
  double p = 1;
  std::size_t arrangements = 0;
};

// Exact two-sided permutation p: enumerate every way to pick |a| of the
// pooled values as the first sample.
inline BruteMww brute_force_mww(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  const std::size_t k = a.size();
  const double mu = static_cast<double>(a.size() * b.size()) / 2.0;
  BruteMww out;
  out.u = u_by_pairs(a, b);
  const double obs = std::abs(out.u - mu);
  std::vector<bool> pick(n, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  std::size_t hit = 0;
  // prev_permutation over a sorted-descending mask visits every subset once.
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) (pick[i] ? x : y).push_back(pooled[i]);
    if (std::abs(u_by_pairs(x, y) - mu) >= obs - 1e-9) ++hit;
    ++out.arrangements;
  } while (std::prev_permutation(pick.begin(), pick.end()));
  out.p = static_cast<double>(hit) / static_cast<double>(out.arrangements);
  return out;
}

inline std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len,
                                              std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  std::vector<std::string> out(len(rng));
  for (auto& t : out) t = "w" + std::to_string(word(rng));
  return out;
}

}  // namespace milrw::testing
