#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "sadi/config.hpp"
#include "sadi/error.hpp"

using namespace sadi;

namespace {

std::pair<ErrorKind, std::string> error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return {e.kind(), e.what()};
  }
  return {ErrorKind::InvalidArgument, ""};
}

const std::map<std::string, std::string> kEvalFlags = {{"model_dir", "m"}, {"data", "d"}, {"out", "o"}};

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("flags override file values") {
    const auto c = parse_config("eval", R"({"delta": 0.5, "model_dir": "m", "data": "d", "out": "o"})",
                                {{"delta", "1.0"}}, false);
    CHECK(c.delta == 1.0f);
    const auto file_only = parse_config("eval", R"({"delta": 0.5, "model_dir": "m", "data": "d", "out": "o"})", {},
                                        false);
    CHECK(file_only.delta == 0.5f);
  }

  TEST_CASE("required and unknown keys") {
    auto [kind, what] = error_of([] { parse_config("eval", R"({"data": "d", "out": "o"})", {}, false); });
    CHECK(kind == ErrorKind::MissingRequired);
    CHECK(what == "model_dir");
    std::tie(kind, what) = error_of([] { parse_config("eval", R"({"detla": 1.0})", kEvalFlags, false); });
    CHECK(kind == ErrorKind::UnknownKey);
    CHECK(what == "detla");
    std::tie(kind, what) = error_of([] { parse_config("eval", "", {{"detla", "1"}}, false); });
    CHECK(kind == ErrorKind::UnknownKey);
  }

  TEST_CASE("type errors name the key") {
    auto [kind, what] = error_of([] { parse_config("eval", R"({"delta": "big"})", kEvalFlags, false); });
    CHECK(kind == ErrorKind::TypeError);
    CHECK(what.rfind("delta", 0) == 0);
    std::tie(kind, what) = error_of([] {
      auto f = kEvalFlags;
      f["delta"] = "1.5x";
      parse_config("eval", "", f, false);
    });
    CHECK(kind == ErrorKind::TypeError);
    CHECK(what.rfind("delta", 0) == 0);
    std::tie(kind, what) = error_of([] { parse_config("eval", "", {{"model_dir", "m"}, {"data", "d"}, {"out", "o"}, {"mode", "loud"}}, false); });
    CHECK(kind == ErrorKind::TypeError);
    CHECK(what.rfind("mode", 0) == 0);
    std::tie(kind, what) = error_of([] { parse_config("mask", "", {{"diffs", "x"}, {"out", "o"}, {"k", "-1"}}, false); });
    CHECK(kind == ErrorKind::TypeError);
  }

  TEST_CASE("range and path checks") {
    CHECK(error_of([] { parse_config("mask", "", {{"diffs", "x"}, {"out", "o"}, {"k", "0"}}, false); }).first ==
          ErrorKind::KOutOfRange);
    CHECK(error_of([] { parse_config("eval", "", kEvalFlags, true); }).first == ErrorKind::IoFailure);
  }

  TEST_CASE("lists, booleans and defaults") {
    const auto c = parse_config("sweep", "",
                                {{"model_dir", "m"},
                                 {"data", "d"},
                                 {"diffs", "x"},
                                 {"out", "o"},
                                 {"k_grid", "1, 2,4"},
                                 {"delta_grid", "0.5,1"},
                                 {"length_normalized", "true"}},
                                false);
    CHECK(c.k_grid == std::vector<std::size_t>{1, 2, 4});
    CHECK(c.delta_grid == std::vector<float>{0.5f, 1.0f});
    CHECK(c.length_normalized);
    CHECK(c.mode == SteeringMode::Off);
    CHECK(c.template_name == "mc");
    const auto snap = nlohmann::json::parse(c.snapshot);
    CHECK(snap.at("k_grid") == nlohmann::json::array({1, 2, 4}));

    const auto steer = parse_config("steer", "", {{"model_dir", "m"}, {"prompt", "hi"}, {"mask", "x"}}, false);
    CHECK(steer.mode == SteeringMode::Adaptive);
    CHECK(error_of([] { parse_config("steer", "", {{"model_dir", "m"}, {"prompt", "hi"}}, false); }).first ==
          ErrorKind::MissingRequired);
  }

  TEST_CASE("keys known to the schema but unused by the subcommand are ignored") {
    const auto c = parse_config("mask", R"({"diffs": "x", "out": "o", "k": 1, "prompt": "unused"})", {}, false);
    CHECK(c.prompt.empty());
    CHECK(nlohmann::json::parse(c.snapshot).contains("prompt") == false);
  }

  TEST_CASE("every subcommand has a key list") {
    for (const auto& s : subcommands()) CHECK_FALSE(subcommand_keys(s).empty());
    CHECK_THROWS_AS(subcommand_keys("train"), Error);
  }
}
