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

#include <cstdlib>

#include "doctest.h"
#include "support.hpp"

using milrw::testing::read_file;
using milrw::testing::source_path;

TEST_CASE("checked-in fixtures match the generator output") {
  milrw::testing::TempDir dir("fixtures");
  const std::string cmd = std::string(MILRW_MAKE_FIXTURES_PATH) + " " + dir.path().string() + " >/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(source_path("data/fixtures"))) {
    const auto name = entry.path().filename().string();
    CAPTURE(name);
    REQUIRE(std::filesystem::exists(dir / name));
    CHECK(read_file(entry.path()) == read_file(dir / name));
    ++files;
  }
  CHECK(files == 7);
}
