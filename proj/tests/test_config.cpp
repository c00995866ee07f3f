// Copyright 2026 The repreval Authors
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


#include "repreval/config.hpp"
#include "repreval/error.hpp"
#include "repreval/report.hpp"

#include <doctest.h>

#include <functional>

using namespace repreval;
using namespace repreval::config;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults cover the schema") {
  const RunConfig c = defaults();
  CHECK(c.values.size() == schema().size());
  CHECK(c.integer("bins") == 20);
  CHECK(c.text("binning") == "equal_width");
  CHECK(c.real("train_fraction") == doctest::Approx(0.8));
  CHECK(c.list("metrics").size() == 7);
  CHECK(c.integer("objects.train_scenes") == 10000);
  for (const auto& [k, s] : c.source) CHECK(s == Source::fallback);
}

TEST_CASE("file values and comments") {
  const RunConfig c = parse_config("# run\nbins = 40\n\nmetrics=mig,dci  # two\n");
  CHECK(c.integer("bins") == 40);
  CHECK(c.list("metrics") == std::vector<std::string>{"mig", "dci"});
  CHECK(c.source.at("bins") == Source::file);
}

TEST_CASE("digest tracks every value") {
  const auto base = io::config_digest(resolved(defaults()));
  CHECK(base == io::config_digest(resolved(defaults())));
  CHECK(base != io::config_digest(resolved(parse_config("bins=40\n"))));
  CHECK(base.size() == 16);
}

TEST_CASE("flag wins over the file and is recorded") {
  RunConfig c = parse_config("bins=40\n");
  set_flag(c, "bins", "10");
  CHECK(c.integer("bins") == 10);
  CHECK(c.source.at("bins") == Source::flag);
  REQUIRE(c.overridden.size() == 1);
  CHECK(c.overridden[0] == "bins");

  // Same value or a fallback key: nothing to record.
  RunConfig d = parse_config("bins=40\n");
  set_flag(d, "bins", "40");
  set_flag(d, "seed", "3");
  CHECK(d.overridden.empty());
}

TEST_CASE("bad keys and values") {
  CHECK(code_of([] { parse_config("binz=3\n"); }) == ErrorCode::UnknownKey);
  CHECK(code_of([] { parse_config("bins=many\n"); }) == ErrorCode::TypeError);
  CHECK(code_of([] { parse_config("train_fraction=0.8x\n"); }) == ErrorCode::TypeError);
  RunConfig c = defaults();
  CHECK(code_of([&] { set_flag(c, "nope", "1"); }) == ErrorCode::UnknownKey);
}

TEST_CASE("prefix filtering") {
  const auto r = resolved(defaults(), {"ood."});
  CHECK_FALSE(r.empty());
  for (const auto& [k, v] : r) CHECK(k.rfind("ood.", 0) == 0);
}

}  // TEST_SUITE
